//! SGD and SAM update steps, learning-rate schedules, and the SS-SAM
//! driver that picks between them with a per-step Bernoulli trial.
//!
//! Every gradient evaluation is one propagation. An SGD step costs one, a
//! SAM step costs two (ascent gradient, then descent gradient at the
//! perturbed point on the same batch).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{axpy, NumericError, Params, RngStream, Scalar, StreamId};
use crate::objective::{Batch, BatchSpace, EpochSampler, Objective, ObjectiveError};
use crate::scheduler::{Schedule, ScheduleError};

pub const DEFAULT_GRAD_NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid optimizer configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("empty trace")]
    EmptyTrace,
    #[error("diverged at step {}: {}", .0.step, .0.reason)]
    Diverged(Box<Divergence>),
}

/// Where and why a run stopped producing finite values.
#[derive(Debug, Clone)]
pub struct Divergence {
    pub step: usize,
    pub reason: String,
    /// Records of the steps completed before `step`.
    pub trace: Vec<StepRecord>,
}

fn diverged(step: usize, reason: impl Into<String>) -> OptimizerError {
    OptimizerError::Diverged(Box::new(Divergence {
        step,
        reason: reason.into(),
        trace: Vec::new(),
    }))
}

/// Turns non-finite failures into a divergence at `step`; other errors
/// pass through.
fn at_step(step: usize) -> impl Fn(OptimizerError) -> OptimizerError {
    move |e| match e {
        OptimizerError::Objective(ObjectiveError::NonFinite { what }) => {
            diverged(step, format!("non-finite {what}"))
        }
        OptimizerError::Objective(ObjectiveError::Numeric(NumericError::NonFinite { index }))
        | OptimizerError::Numeric(NumericError::NonFinite { index }) => {
            diverged(step, format!("non-finite value at index {index}"))
        }
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant {
        lr: f64,
    },
    /// `lr_base * (1 + cos(t pi / T)) / 2`, no warmup or restarts.
    Cosine {
        lr_base: f64,
    },
}

impl LrSchedule {
    fn base(&self) -> f64 {
        match *self {
            LrSchedule::Constant { lr } => lr,
            LrSchedule::Cosine { lr_base } => lr_base,
        }
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        let lr = self.base();
        if lr > 0.0 && lr.is_finite() {
            Ok(())
        } else {
            Err(OptimizerError::Config(format!(
                "learning rate {lr} must be positive"
            )))
        }
    }

    pub fn lr_at(&self, t: usize, total: usize) -> Result<f64, OptimizerError> {
        if t >= total {
            return Err(ScheduleError::StepOutOfRange { t, total }.into());
        }
        Ok(match *self {
            LrSchedule::Constant { lr } => lr,
            LrSchedule::Cosine { lr_base } => {
                lr_base * 0.5 * (1.0 + (t as f64 * PI / total as f64).cos())
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub rho: f64,
    pub lr_schedule: LrSchedule,
    pub total_steps: usize,
    /// Ignored by objectives without samples.
    pub batch_size: usize,
    pub seed: u64,
    pub grad_norm_floor: f64,
}

impl OptimizerConfig {
    pub fn new(
        rho: f64,
        lr_schedule: LrSchedule,
        total_steps: usize,
        batch_size: usize,
        seed: u64,
    ) -> Self {
        Self {
            rho,
            lr_schedule,
            total_steps,
            batch_size,
            seed,
            grad_norm_floor: DEFAULT_GRAD_NORM_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(OptimizerError::Config(format!(
                "rho {} must be positive",
                self.rho
            )));
        }
        self.lr_schedule.validate()?;
        if self.total_steps == 0 {
            return Err(OptimizerError::Config(
                "total steps must be at least 1".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(OptimizerError::Config(
                "batch size must be at least 1".into(),
            ));
        }
        if !(self.grad_norm_floor >= 0.0 && self.grad_norm_floor.is_finite()) {
            return Err(OptimizerError::Config(format!(
                "gradient norm floor {} must be >= 0",
                self.grad_norm_floor
            )));
        }
        Ok(())
    }
}

/// One update of a run. `loss` and `grad_norm` are measured at the
/// parameters the step started from; `eps_norm` is the SAM perturbation
/// length (0 for SGD steps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub x_t: u8,
    pub eta_t: u8,
    pub loss: f64,
    pub grad_norm: f64,
    pub eps_norm: f64,
}

/// `rho * g / |g|`, or zero when `|g| <= floor`.
pub fn compute_epsilon<S: Scalar>(
    g: &Params<S>,
    rho: S,
    floor: S,
) -> Result<Params<S>, OptimizerError> {
    if !(rho > S::zero() && rho.is_finite()) {
        return Err(OptimizerError::Config(format!(
            "rho {rho} must be positive"
        )));
    }
    let norm = g.norm();
    if !norm.is_finite() {
        return Err(NumericError::NonFinite { index: 0 }.into());
    }
    if norm <= floor {
        return Ok(Params::zeros(g.len()));
    }
    Ok(g.scaled(rho / norm)?)
}

fn descend<S: Scalar>(
    theta: &Params<S>,
    grad: &Params<S>,
    lr: f64,
) -> Result<Params<S>, OptimizerError> {
    Ok(axpy(S::of(-lr), grad, theta)?)
}

/// Plain gradient step `theta - lr * grad L(theta)`.
pub fn sgd_step<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    theta: &Params<S>,
    batch: &Batch,
    lr: f64,
    t: usize,
) -> Result<(Params<S>, StepRecord), OptimizerError> {
    let run = || {
        let (loss, grad) = obj.value_and_grad(theta, batch)?;
        let next = descend(theta, &grad, lr)?;
        Ok((
            next,
            StepRecord {
                t,
                x_t: 0,
                eta_t: 1,
                loss: loss.as_f64(),
                grad_norm: grad.norm().as_f64(),
                eps_norm: 0.0,
            },
        ))
    };
    run().map_err(at_step(t))
}

/// Two-propagation SAM step on a single batch:
/// `g1 = grad L(theta)`, `eps = compute_epsilon(g1)`,
/// `g2 = grad L(theta + eps)`, `theta' = theta - lr * g2`.
pub fn sam_step<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    theta: &Params<S>,
    batch: &Batch,
    lr: f64,
    rho: f64,
    floor: f64,
    t: usize,
) -> Result<(Params<S>, StepRecord), OptimizerError> {
    let run = || {
        let (loss, g1) = obj.value_and_grad(theta, batch)?;
        let eps = compute_epsilon(&g1, S::of(rho), S::of(floor))?;
        let perturbed = theta.add(&eps)?;
        let (_, g2) = obj.value_and_grad(&perturbed, batch)?;
        let next = descend(theta, &g2, lr)?;
        Ok((
            next,
            StepRecord {
                t,
                x_t: 1,
                eta_t: 2,
                loss: loss.as_f64(),
                grad_norm: g1.norm().as_f64(),
                eps_norm: eps.norm().as_f64(),
            },
        ))
    };
    run().map_err(at_step(t))
}

/// `(sum eta_t) / T`, summed in integers.
pub fn empirical_eta(trace: &[StepRecord]) -> Result<f64, OptimizerError> {
    if trace.is_empty() {
        return Err(OptimizerError::EmptyTrace);
    }
    let total: u64 = trace.iter().map(|r| u64::from(r.eta_t)).sum();
    Ok(total as f64 / trace.len() as f64)
}

#[derive(Debug, Clone)]
pub struct RunReport<S: Scalar> {
    pub final_theta: Params<S>,
    pub trace: Vec<StepRecord>,
    pub empirical_eta: f64,
    /// Exact expectation `1 + mean p(t)` for the schedule.
    pub expected_eta: f64,
    pub seed: u64,
    /// Canonical schedule string.
    pub schedule: String,
}

impl<S: Scalar> RunReport<S> {
    /// Total propagations spent: `T + sum x_t`.
    pub fn propagations(&self) -> u64 {
        self.trace.iter().map(|r| u64::from(r.eta_t)).sum()
    }

    pub fn sam_steps(&self) -> u64 {
        self.trace.iter().map(|r| u64::from(r.x_t)).sum()
    }
}

/// SS-SAM from a starting point drawn from the seed's init stream.
pub fn ss_sam_run<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    config: &OptimizerConfig,
    schedule: &Schedule,
) -> Result<RunReport<S>, OptimizerError> {
    let theta0 = obj.init_params(&mut RngStream::new(config.seed, StreamId::Init));
    ss_sam_run_from(obj, config, schedule, theta0)
}

/// SS-SAM from `theta0`.
pub fn ss_sam_run_from<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    config: &OptimizerConfig,
    schedule: &Schedule,
    theta0: Params<S>,
) -> Result<RunReport<S>, OptimizerError> {
    ss_sam_run_observed(obj, config, schedule, theta0, |_, _| {})
}

/// SS-SAM from `theta0`, calling `observe` with each step's record and the
/// parameters it produced.
///
/// Step `t` draws `X(t) ~ Bernoulli(p(t))` from the trial stream, takes the
/// next minibatch from the batch stream (objectives with samples only),
/// and performs a SAM step if `X(t) = 1`, otherwise an SGD step.
pub fn ss_sam_run_observed<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    config: &OptimizerConfig,
    schedule: &Schedule,
    theta0: Params<S>,
    mut observe: impl FnMut(&StepRecord, &Params<S>),
) -> Result<RunReport<S>, OptimizerError> {
    config.validate()?;
    let total = config.total_steps;
    schedule.validate(total)?;
    if theta0.len() != obj.param_dim() {
        return Err(NumericError::DimensionMismatch {
            expected: obj.param_dim(),
            found: theta0.len(),
        }
        .into());
    }

    let mut trials = RngStream::new(config.seed, StreamId::Trial);
    let mut batches = RngStream::new(config.seed, StreamId::Batch);
    let mut sampler = match obj.batch_space() {
        BatchSpace::Full => None,
        BatchSpace::Indexed { len } => Some(EpochSampler::new(len, config.batch_size)?),
    };

    let mut theta = theta0;
    let mut trace = Vec::with_capacity(total);
    for t in 0..total {
        let p = schedule.eval(t, total)?;
        let sam = trials.bernoulli(p)?;
        let batch = match sampler.as_mut() {
            Some(s) => s.next_batch(&mut batches),
            None => Batch::Full,
        };
        let lr = config.lr_schedule.lr_at(t, total)?;
        let step = if sam {
            sam_step(
                obj,
                &theta,
                &batch,
                lr,
                config.rho,
                config.grad_norm_floor,
                t,
            )
        } else {
            sgd_step(obj, &theta, &batch, lr, t)
        };
        match step {
            Ok((next, record)) => {
                observe(&record, &next);
                theta = next;
                trace.push(record);
            }
            Err(OptimizerError::Diverged(mut d)) => {
                d.trace = trace;
                return Err(OptimizerError::Diverged(d));
            }
            Err(e) => return Err(e),
        }
    }

    Ok(RunReport {
        final_theta: theta,
        empirical_eta: empirical_eta(&trace)?,
        expected_eta: schedule.expected_eta_exact(total)?,
        trace,
        seed: config.seed,
        schedule: schedule.to_string(),
    })
}
