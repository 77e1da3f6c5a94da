//! Flatness diagnostics: the first-order sharpness proxy SAM optimizes,
//! the top Hessian eigenvalue by power iteration, and 1-D loss slices.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{format_float, NumericError, Params, RngStream, Scalar, StreamId};
use crate::objective::{Batch, Counted, Objective, ObjectiveError};
use crate::optimizer::{compute_epsilon, OptimizerError};

#[derive(Debug, Error)]
pub enum SharpnessError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub max_iters: usize,
    /// Absolute change in successive eigenvalue estimates that counts as
    /// converged.
    pub tol: f64,
    /// Finite-difference step for Hessian-vector products; `None` uses
    /// `1e-4 * (1 + |theta|)`.
    pub probe_h: Option<f64>,
    /// Seed of the landscape stream the start vector is drawn from.
    pub start_seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            tol: 1e-9,
            probe_h: None,
            start_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenEstimate<S: Scalar> {
    /// Dominant-magnitude eigenvalue estimate (Rayleigh quotient).
    pub value: S,
    /// Unit-norm eigenvector estimate.
    pub vector: Params<S>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn default_probe_h<S: Scalar>(theta: &Params<S>) -> f64 {
    1e-4 * (1.0 + theta.norm().as_f64())
}

/// `Hv ~ (grad L(theta + h v) - grad L(theta - h v)) / 2h`.
pub fn hessian_vector_product<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    theta: &Params<S>,
    batch: &Batch,
    v: &Params<S>,
    h: f64,
) -> Result<Params<S>, SharpnessError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(SharpnessError::Argument(format!(
            "probe step {h} must be positive"
        )));
    }
    let hs = S::of(h);
    let step = v.scaled(hs)?;
    let (_, gp) = obj.value_and_grad(&theta.add(&step)?, batch)?;
    let (_, gm) = obj.value_and_grad(&theta.sub(&step)?, batch)?;
    Ok(gp.sub(&gm)?.scaled(S::one() / (S::of(2.0) * hs))?)
}

fn normalized<S: Scalar>(v: &Params<S>) -> Option<Params<S>> {
    let n = v.norm();
    if n > S::zero() {
        v.scaled(S::one() / n).ok()
    } else {
        None
    }
}

/// Power iteration from a random start vector; see [`hessian_top_eigen_from`].
pub fn hessian_top_eigen<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    theta: &Params<S>,
    batch: &Batch,
    options: &EigenOptions,
) -> Result<EigenEstimate<S>, SharpnessError> {
    let mut rng = RngStream::new(options.start_seed, StreamId::Landscape);
    let start = Params::new(
        (0..theta.len())
            .map(|_| S::of(rng.standard_normal()))
            .collect(),
    )?;
    hessian_top_eigen_from(obj, theta, batch, options, &start)
}

/// Power iteration on finite-difference Hessian-vector products.
///
/// The estimate before any iteration is the Rayleigh quotient of `start`;
/// iteration `k` replaces the vector by `Hv / |Hv|` and stops once its
/// Rayleigh quotient moves by less than `tol`. Exhausting `max_iters`
/// returns the last estimate with `converged = false`.
pub fn hessian_top_eigen_from<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    theta: &Params<S>,
    batch: &Batch,
    options: &EigenOptions,
    start: &Params<S>,
) -> Result<EigenEstimate<S>, SharpnessError> {
    if options.max_iters == 0 {
        return Err(SharpnessError::Argument(
            "max_iters must be at least 1".into(),
        ));
    }
    if start.len() != theta.len() {
        return Err(NumericError::DimensionMismatch {
            expected: theta.len(),
            found: start.len(),
        }
        .into());
    }
    let h = options.probe_h.unwrap_or_else(|| default_probe_h(theta));
    let mut v =
        normalized(start).ok_or_else(|| SharpnessError::Argument("start vector is zero".into()))?;
    let mut hv = hessian_vector_product(obj, theta, batch, &v, h)?;
    let mut value = v.dot(&hv)?;

    for k in 1..=options.max_iters {
        let Some(next) = normalized(&hv) else {
            // Hv = 0: v spans the null space and no direction has curvature.
            return Ok(EigenEstimate {
                value: S::zero(),
                vector: v,
                iterations: k - 1,
                converged: true,
            });
        };
        v = next;
        hv = hessian_vector_product(obj, theta, batch, &v, h)?;
        let prev = value;
        value = v.dot(&hv)?;
        if (value - prev).abs().as_f64() < options.tol {
            return Ok(EigenEstimate {
                value,
                vector: v,
                iterations: k,
                converged: true,
            });
        }
    }
    Ok(EigenEstimate {
        value,
        vector: v,
        iterations: options.max_iters,
        converged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpnessOptions {
    /// Below this gradient norm the ascent direction is the top Hessian
    /// eigenvector instead of the gradient.
    pub grad_floor: f64,
    pub eigen: EigenOptions,
}

impl Default for SharpnessOptions {
    fn default() -> Self {
        Self {
            grad_floor: 1e-8,
            eigen: EigenOptions::default(),
        }
    }
}

/// `L(theta + eps) - L(theta)` with `eps = rho g / |g|`.
pub fn sharpness_proxy<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    theta: &Params<S>,
    rho: f64,
    batch: &Batch,
) -> Result<S, SharpnessError> {
    sharpness_proxy_with(obj, theta, rho, batch, &SharpnessOptions::default())
}

pub fn sharpness_proxy_with<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    theta: &Params<S>,
    rho: f64,
    batch: &Batch,
    options: &SharpnessOptions,
) -> Result<S, SharpnessError> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(SharpnessError::Argument(format!(
            "rho {rho} must be positive"
        )));
    }
    let (base, g) = obj.value_and_grad(theta, batch)?;
    let eps = if g.norm().as_f64() > options.grad_floor {
        compute_epsilon(&g, S::of(rho), S::zero())?
    } else {
        let top = hessian_top_eigen(obj, theta, batch, &options.eigen)?;
        top.vector.scaled(S::of(rho))?
    };
    let shifted = obj.value(&theta.add(&eps)?, batch)?;
    Ok(shifted - base)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub proxy_gap: f64,
    pub top_eigenvalue: f64,
    pub eigen_converged: bool,
    pub rho_used: f64,
    /// Propagations spent building the report.
    pub probe_count: usize,
}

pub fn sharpness_report<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    theta: &Params<S>,
    rho: f64,
    batch: &Batch,
    options: &SharpnessOptions,
) -> Result<SharpnessReport, SharpnessError> {
    let counted = Counted::new(obj);
    let proxy = sharpness_proxy_with(&counted, theta, rho, batch, options)?;
    let top = hessian_top_eigen(&counted, theta, batch, &options.eigen)?;
    Ok(SharpnessReport {
        proxy_gap: proxy.as_f64(),
        top_eigenvalue: top.value.as_f64(),
        eigen_converged: top.converged,
        rho_used: rho,
        probe_count: counted.propagations(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicePoint {
    pub offset: f64,
    /// `None` where the loss was not finite.
    pub loss: Option<f64>,
}

/// Loss at `n_points` equally spaced offsets in `[-half_width, half_width]`
/// along the unit vector of `direction`.
pub fn loss_slice<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    theta: &Params<S>,
    direction: &Params<S>,
    half_width: f64,
    n_points: usize,
    batch: &Batch,
) -> Result<Vec<SlicePoint>, SharpnessError> {
    if n_points < 2 {
        return Err(SharpnessError::Argument(
            "a slice needs at least 2 points".into(),
        ));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(SharpnessError::Argument(format!(
            "half width {half_width} must be positive"
        )));
    }
    if direction.len() != theta.len() {
        return Err(NumericError::DimensionMismatch {
            expected: theta.len(),
            found: direction.len(),
        }
        .into());
    }
    let unit = normalized(direction)
        .ok_or_else(|| SharpnessError::Argument("direction is zero".into()))?;
    let last = (n_points - 1) as f64;
    let mut out = Vec::with_capacity(n_points);
    for i in 0..n_points {
        // Symmetric in i so an odd count puts exactly 0 in the middle.
        let offset = half_width * (2.0 * i as f64 - last) / last;
        let loss = crate::numeric::axpy(S::of(offset), &unit, theta)
            .ok()
            .and_then(|p| obj.value(&p, batch).ok())
            .map(|v| v.as_f64())
            .filter(|v| v.is_finite());
        out.push(SlicePoint { offset, loss });
    }
    Ok(out)
}

/// CSV with header `offset,loss`; missing losses are empty fields.
pub fn slice_to_csv(points: &[SlicePoint]) -> String {
    let mut out = String::from("offset,loss\n");
    for p in points {
        match p.loss {
            Some(l) => writeln!(out, "{},{}", format_float(p.offset), format_float(l)),
            None => writeln!(out, "{},", format_float(p.offset)),
        }
        .expect("writing to a String cannot fail");
    }
    out
}
