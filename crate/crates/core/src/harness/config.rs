use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::objective::{
    make_dataset, Activation, Dataset, DatasetSpec, Mlp, MlpObjective, Objective, Quadratic,
    TwoWell, WeightDecay,
};
use crate::optimizer::{LrSchedule, OptimizerConfig, DEFAULT_GRAD_NORM_FLOOR};
use crate::scheduler::Schedule;

/// Experiment description read from TOML:
///
/// ```toml
/// [experiment]
/// name = "moons"
/// seeds = [1, 2, 3, 4, 5]
/// output_dir = "out/moons"
///
/// [objective]
/// kind = "mlp"
/// layers = [2, 16, 16, 2]
/// train = { generator = "two_moons", size = 400, num_classes = 2, noise = 0.2, seed = 1 }
/// test = { generator = "two_moons", size = 400, num_classes = 2, noise = 0.2, seed = 2 }
///
/// [optimizer]
/// rho = 0.05
/// lr = 0.1
/// lr_schedule = "cosine"
/// total_steps = 2000
/// batch_size = 32
///
/// [schedule]
/// spec = "constant(a_c=0.5)"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub objective: ObjectiveSpec,
    pub optimizer: OptimizerSection,
    pub schedule: ScheduleSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    /// `0.5 (theta - center)^T diag(curvatures) (theta - center)`.
    Quadratic {
        curvatures: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default)]
        weight_decay: f64,
    },
    TwoWell {
        flat_center: f64,
        sharp_center: f64,
        flat_curvature: f64,
        sharp_curvature: f64,
        #[serde(default)]
        transverse_dims: usize,
        #[serde(default)]
        weight_decay: f64,
    },
    Mlp {
        layers: Vec<usize>,
        #[serde(default)]
        activation: Activation,
        train: DatasetSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test: Option<DatasetSpec>,
        #[serde(default)]
        weight_decay: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrKind {
    Constant,
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub rho: f64,
    pub lr: f64,
    #[serde(default = "default_lr_kind")]
    pub lr_schedule: LrKind,
    /// Either `total_steps` or `epochs` (sample-based objectives only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_floor")]
    pub grad_norm_floor: f64,
}

fn default_lr_kind() -> LrKind {
    LrKind::Constant
}

fn default_batch_size() -> usize {
    1
}

fn default_floor() -> f64 {
    DEFAULT_GRAD_NORM_FLOOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// Canonical schedule string, e.g. `piecewise(a_p=0,b_p=0.5)`.
    pub spec: String,
}

/// An objective ready to train, plus what evaluation needs.
pub struct BuiltObjective {
    pub objective: Box<dyn Objective<f64>>,
    /// Network and held-out set for classifier objectives with a test set.
    pub classifier: Option<(Mlp, Dataset)>,
    /// Training set size for sample-based objectives.
    pub train_len: Option<usize>,
}

impl ObjectiveSpec {
    fn weight_decay(&self) -> f64 {
        match self {
            ObjectiveSpec::Quadratic { weight_decay, .. }
            | ObjectiveSpec::TwoWell { weight_decay, .. }
            | ObjectiveSpec::Mlp { weight_decay, .. } => *weight_decay,
        }
    }

    pub fn build(&self) -> Result<BuiltObjective, HarnessError> {
        let wd = self.weight_decay();
        Ok(match self {
            ObjectiveSpec::Quadratic {
                curvatures, center, ..
            } => {
                let mut q = Quadratic::<f64>::diagonal(curvatures)?;
                if let Some(c) = center {
                    q = q.with_center(c)?;
                }
                BuiltObjective {
                    objective: Box::new(WeightDecay::new(q, wd)?),
                    classifier: None,
                    train_len: None,
                }
            }
            ObjectiveSpec::TwoWell {
                flat_center,
                sharp_center,
                flat_curvature,
                sharp_curvature,
                transverse_dims,
                ..
            } => {
                let w = TwoWell::<f64>::new(
                    *flat_center,
                    *sharp_center,
                    *flat_curvature,
                    *sharp_curvature,
                    *transverse_dims,
                )?;
                BuiltObjective {
                    objective: Box::new(WeightDecay::new(w, wd)?),
                    classifier: None,
                    train_len: None,
                }
            }
            ObjectiveSpec::Mlp {
                layers,
                activation,
                train,
                test,
                ..
            } => {
                let mlp = Mlp::new(layers.clone(), *activation)?;
                let train_set = make_dataset(train)?;
                let train_len = train_set.len();
                let classifier = match test {
                    Some(spec) => Some((mlp.clone(), make_dataset(spec)?)),
                    None => None,
                };
                let obj = MlpObjective::<f64>::new(mlp, train_set)?;
                BuiltObjective {
                    objective: Box::new(WeightDecay::new(obj, wd)?),
                    classifier,
                    train_len: Some(train_len),
                }
            }
        })
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config always serializes")
    }

    pub fn schedule(&self) -> Result<Schedule, HarnessError> {
        self.schedule
            .spec
            .parse()
            .map_err(|e: crate::scheduler::ScheduleError| HarnessError::Config(e.to_string()))
    }

    /// `T` as given, or `epochs * ceil(N / B)` for sample-based objectives.
    pub fn total_steps(&self) -> Result<usize, HarnessError> {
        let opt = &self.optimizer;
        match (opt.total_steps, opt.epochs) {
            (Some(t), None) => Ok(t),
            (None, Some(epochs)) => {
                let n = match &self.objective {
                    ObjectiveSpec::Mlp { train, .. } => train.size,
                    _ => {
                        return Err(HarnessError::Config(
                            "epochs need a sample-based objective; use total_steps".into(),
                        ))
                    }
                };
                if opt.batch_size == 0 {
                    return Err(HarnessError::Config("batch size must be at least 1".into()));
                }
                Ok(epochs * n.div_ceil(opt.batch_size))
            }
            (Some(_), Some(_)) => Err(HarnessError::Config(
                "give total_steps or epochs, not both".into(),
            )),
            (None, None) => Err(HarnessError::Config("missing total_steps or epochs".into())),
        }
    }

    pub fn optimizer_config(&self, seed: u64) -> Result<OptimizerConfig, HarnessError> {
        let opt = &self.optimizer;
        let lr_schedule = match opt.lr_schedule {
            LrKind::Constant => LrSchedule::Constant { lr: opt.lr },
            LrKind::Cosine => LrSchedule::Cosine { lr_base: opt.lr },
        };
        let mut cfg = OptimizerConfig::new(
            opt.rho,
            lr_schedule,
            self.total_steps()?,
            opt.batch_size,
            seed,
        );
        cfg.grad_norm_floor = opt.grad_norm_floor;
        cfg.validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Checks everything that can be checked without training.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.experiment.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        let mut seen = self.experiment.seeds.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(HarnessError::Config("seeds must be distinct".into()));
        }
        let cfg = self.optimizer_config(self.experiment.seeds[0])?;
        self.schedule()?
            .validate(cfg.total_steps)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    /// Builds the objective, reporting failures as configuration errors.
    pub fn build_objective(&self) -> Result<BuiltObjective, HarnessError> {
        let built = self
            .objective
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if let Some(n) = built.train_len {
            let b = self.optimizer.batch_size;
            if b > n {
                return Err(HarnessError::Config(format!(
                    "batch size {b} exceeds {n} training samples"
                )));
            }
        }
        Ok(built)
    }
}
