//! Dense parameter vectors, split random streams and finite differences.

mod finite_diff;
mod format;
mod rng;
mod scalar;
mod vector;

pub use finite_diff::central_diff_grad;
pub use format::format_float;
pub use rng::{RngStream, StreamId};
pub use scalar::Scalar;
pub use vector::{axpy, l2_norm, Params};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("dimension mismatch: expected length {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parameter vector must not be empty")]
    Empty,
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("function evaluation produced a non-finite value at probe {probe}")]
    Evaluation { probe: usize },
}
