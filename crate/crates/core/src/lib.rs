//! Stochastic scheduled sharpness-aware minimization.
//!
//! Each update runs a Bernoulli trial with probability `p(t)` from a
//! [`scheduler::Schedule`]: failure takes a plain SGD step (one
//! propagation), success a SAM step (two propagations). The crate provides
//! the optimizer, the schedule families with their exact and closed-form
//! expected costs, objectives to train on, flatness diagnostics and a
//! multi-seed experiment harness.
//!
//! The numeric core is generic over [`numeric::Scalar`] (`f32` or `f64`);
//! the aliases below fix the scalar type.

pub mod harness;
pub mod numeric;
pub mod objective;
pub mod optimizer;
pub mod scheduler;
pub mod sharpness;

pub type ParamVector = numeric::Params<f64>;
pub type ParamVectorF32 = numeric::Params<f32>;
pub type TwoWellLandscape = objective::TwoWell<f64>;
pub type QuadraticObjective = objective::Quadratic<f64>;
pub type MlpModel = objective::MlpObjective<f64>;
pub type RunReport = optimizer::RunReport<f64>;
pub type EigenEstimate = sharpness::EigenEstimate<f64>;
