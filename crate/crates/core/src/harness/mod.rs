//! Experiment runner behind the `sssam` CLI: TOML configs, multi-seed runs
//! with mean/std aggregation, expected-cost tables checked against the
//! published values, and CSV output for schedule plots and loss slices.

mod config;
mod eta_table;
mod experiment;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{Params, Scalar};
use crate::objective::{Dataset, Mlp, ObjectiveError};
use crate::optimizer::OptimizerError;
use crate::scheduler::ScheduleError;
use crate::sharpness::SharpnessError;

pub use config::{
    BuiltObjective, ExperimentConfig, ExperimentSection, LrKind, ObjectiveSpec, OptimizerSection,
    ScheduleSection,
};
pub use eta_table::{
    eta_table, eta_table_csv, eta_table_with, parse_registry, published_registry,
    read_schedule_list, EtaRow, PublishedEta, ERRATUM_TOLERANCE,
};
pub use experiment::{
    emit_schedule_plot, replot_from_report, run_experiment, schedule_plot_csv,
    sharpness_from_report, trace_from_csv, trace_to_csv, AggregateReport, Failure, SeedOutcome,
    SeedReport, SharpnessOutput, AGGREGATE_FILE, SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what} in {path}: {reason}")]
    Format {
        what: &'static str,
        path: String,
        reason: String,
    },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Sharpness(#[from] SharpnessError),
}

impl HarnessError {
    /// Process exit status for this error: 3 for configuration problems,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Schedule(_) => 3,
            _ => 1,
        }
    }
}

pub(crate) fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Mean and sample standard deviation (`n - 1` denominator) of per-seed values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// `None` for a single value.
    pub std: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        if values.iter().all(|v| v.to_bits() == values[0].to_bits()) {
            return Some(Self {
                n,
                mean: values[0],
                std: (n > 1).then_some(0.0),
            });
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = (n > 1).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        });
        Some(Self { n, mean, std })
    }
}

/// Fraction of `data` that `mlp` with parameters `theta` misclassifies.
pub fn evaluate<S: Scalar>(
    mlp: &Mlp,
    theta: &Params<S>,
    data: &Dataset,
) -> Result<f64, HarnessError> {
    if data.is_empty() {
        return Err(ObjectiveError::Domain("evaluation set is empty".into()).into());
    }
    let mut wrong = 0usize;
    for (i, &label) in data.labels().iter().enumerate() {
        if mlp.predict(theta, data.input(i))? != label {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / data.len() as f64)
}
