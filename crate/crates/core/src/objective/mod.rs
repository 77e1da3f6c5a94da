//! Differentiable objectives: analytic landscapes, synthetic datasets and a
//! small multilayer perceptron with hand-written backpropagation.

mod dataset;
mod mlp;
mod quadratic;
mod two_well;

use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

use crate::numeric::{NumericError, Params, RngStream, Scalar};

pub use dataset::{make_dataset, Dataset, DatasetSpec, EpochSampler, Generator};
pub use mlp::{Activation, Mlp, MlpObjective};
pub use quadratic::{Linear, Quadratic};
pub use two_well::TwoWell;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite {what}")]
    NonFinite { what: &'static str },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Selects which samples a loss evaluation averages over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Batch {
    /// Every sample (or the whole analytic landscape).
    Full,
    Indices(Vec<usize>),
}

/// Batches an objective accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSpace {
    /// Analytic objectives without samples; only [`Batch::Full`] is valid.
    Full,
    /// Sample-based objectives over `len` samples.
    Indexed { len: usize },
}

impl BatchSpace {
    pub fn check(&self, batch: &Batch) -> Result<(), ObjectiveError> {
        match (self, batch) {
            (_, Batch::Full) => Ok(()),
            (BatchSpace::Full, Batch::Indices(_)) => Err(ObjectiveError::Domain(
                "objective has no samples; only the full batch is valid".into(),
            )),
            (BatchSpace::Indexed { .. }, Batch::Indices(idx)) if idx.is_empty() => {
                Err(ObjectiveError::Domain("empty batch".into()))
            }
            (BatchSpace::Indexed { len }, Batch::Indices(idx)) => {
                match idx.iter().find(|&&i| i >= *len) {
                    Some(bad) => Err(ObjectiveError::Domain(format!(
                        "batch index {bad} out of range for {len} samples"
                    ))),
                    None => Ok(()),
                }
            }
        }
    }
}

/// A loss `L(theta)` with its exact gradient.
///
/// Each call to [`Objective::value_and_grad`] is one forward-backward
/// propagation for cost accounting.
pub trait Objective<S: Scalar>: Send + Sync {
    fn param_dim(&self) -> usize;

    fn batch_space(&self) -> BatchSpace {
        BatchSpace::Full
    }

    fn value_and_grad(
        &self,
        theta: &Params<S>,
        batch: &Batch,
    ) -> Result<(S, Params<S>), ObjectiveError>;

    fn value(&self, theta: &Params<S>, batch: &Batch) -> Result<S, ObjectiveError> {
        self.value_and_grad(theta, batch).map(|(v, _)| v)
    }

    /// Draws a starting point from the init stream.
    fn init_params(&self, rng: &mut RngStream) -> Params<S>;
}

impl<S: Scalar, O: Objective<S> + ?Sized> Objective<S> for &O {
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn batch_space(&self) -> BatchSpace {
        (**self).batch_space()
    }
    fn value_and_grad(
        &self,
        theta: &Params<S>,
        batch: &Batch,
    ) -> Result<(S, Params<S>), ObjectiveError> {
        (**self).value_and_grad(theta, batch)
    }
    fn value(&self, theta: &Params<S>, batch: &Batch) -> Result<S, ObjectiveError> {
        (**self).value(theta, batch)
    }
    fn init_params(&self, rng: &mut RngStream) -> Params<S> {
        (**self).init_params(rng)
    }
}

impl<S: Scalar, O: Objective<S> + ?Sized> Objective<S> for Box<O> {
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn batch_space(&self) -> BatchSpace {
        (**self).batch_space()
    }
    fn value_and_grad(
        &self,
        theta: &Params<S>,
        batch: &Batch,
    ) -> Result<(S, Params<S>), ObjectiveError> {
        (**self).value_and_grad(theta, batch)
    }
    fn value(&self, theta: &Params<S>, batch: &Batch) -> Result<S, ObjectiveError> {
        (**self).value(theta, batch)
    }
    fn init_params(&self, rng: &mut RngStream) -> Params<S> {
        (**self).init_params(rng)
    }
}

pub(crate) fn check_theta<S: Scalar>(dim: usize, theta: &Params<S>) -> Result<(), ObjectiveError> {
    if theta.len() != dim {
        return Err(NumericError::DimensionMismatch {
            expected: dim,
            found: theta.len(),
        }
        .into());
    }
    Ok(())
}

/// Adds `0.5 * coeff * |theta|^2` to the wrapped loss.
///
/// The term is part of the loss, so SAM's perturbation and both of its
/// propagations see it.
#[derive(Debug, Clone)]
pub struct WeightDecay<O> {
    inner: O,
    coeff: f64,
}

impl<O> WeightDecay<O> {
    pub fn new(inner: O, coeff: f64) -> Result<Self, ObjectiveError> {
        if !(coeff >= 0.0 && coeff.is_finite()) {
            return Err(ObjectiveError::Config(format!(
                "weight decay {coeff} must be >= 0"
            )));
        }
        Ok(Self { inner, coeff })
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }
}

impl<S: Scalar, O: Objective<S>> Objective<S> for WeightDecay<O> {
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }

    fn batch_space(&self) -> BatchSpace {
        self.inner.batch_space()
    }

    fn value_and_grad(
        &self,
        theta: &Params<S>,
        batch: &Batch,
    ) -> Result<(S, Params<S>), ObjectiveError> {
        let (loss, grad) = self.inner.value_and_grad(theta, batch)?;
        if self.coeff == 0.0 {
            return Ok((loss, grad));
        }
        let c = S::of(self.coeff);
        let half = S::of(0.5);
        let sq: S = theta.iter().map(|&v| v * v).sum();
        let grad = crate::numeric::axpy(c, theta, &grad)?;
        Ok((loss + half * c * sq, grad))
    }

    fn init_params(&self, rng: &mut RngStream) -> Params<S> {
        self.inner.init_params(rng)
    }
}

/// Counts propagations made through it.
#[derive(Debug)]
pub struct Counted<O> {
    inner: O,
    calls: AtomicUsize,
}

impl<O> Counted<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn propagations(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }
}

impl<S: Scalar, O: Objective<S>> Objective<S> for Counted<O> {
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }

    fn batch_space(&self) -> BatchSpace {
        self.inner.batch_space()
    }

    fn value_and_grad(
        &self,
        theta: &Params<S>,
        batch: &Batch,
    ) -> Result<(S, Params<S>), ObjectiveError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.value_and_grad(theta, batch)
    }

    fn value(&self, theta: &Params<S>, batch: &Batch) -> Result<S, ObjectiveError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.value(theta, batch)
    }

    fn init_params(&self, rng: &mut RngStream) -> Params<S> {
        self.inner.init_params(rng)
    }
}
