use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Batch, ObjectiveError};
use crate::numeric::{format_float, RngStream, StreamId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Isotropic Gaussian clusters with centers evenly spaced on a circle of radius 2.
    Blobs,
    /// Two interleaved half circles (always two classes).
    TwoMoons,
    /// One spiral arm per class.
    Spiral,
}

impl FromStr for Generator {
    type Err = ObjectiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "blobs" => Ok(Generator::Blobs),
            "two_moons" => Ok(Generator::TwoMoons),
            "spiral" => Ok(Generator::Spiral),
            other => Err(ObjectiveError::Config(format!(
                "unknown dataset generator `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Generator::Blobs => "blobs",
            Generator::TwoMoons => "two_moons",
            Generator::Spiral => "spiral",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub generator: Generator,
    pub size: usize,
    pub num_classes: usize,
    pub noise: f64,
    pub seed: u64,
}

/// Labelled two-dimensional (or imported n-dimensional) points.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_dim: usize,
    num_classes: usize,
    /// Row-major `len x feature_dim`.
    inputs: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        feature_dim: usize,
        num_classes: usize,
        inputs: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self, ObjectiveError> {
        if feature_dim == 0 || num_classes == 0 {
            return Err(ObjectiveError::Config(
                "datasets need features and classes".into(),
            ));
        }
        if labels.is_empty() || inputs.len() != labels.len() * feature_dim {
            return Err(ObjectiveError::Config(format!(
                "{} inputs do not fit {} labels of dimension {feature_dim}",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(ObjectiveError::Config(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(ObjectiveError::NonFinite {
                what: "dataset feature",
            });
        }
        Ok(Self {
            feature_dim,
            num_classes,
            inputs,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// CSV with header `x0,...,x{d-1},label`; floats in shortest
    /// round-trip decimal form.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for j in 0..self.feature_dim {
            out.push_str(&format!("x{j},"));
        }
        out.push_str("label\n");
        for i in 0..self.len() {
            for v in self.input(i) {
                out.push_str(&format_float(*v));
                out.push(',');
            }
            out.push_str(&format!("{}\n", self.labels[i]));
        }
        out
    }

    /// Parses [`Dataset::to_csv`] output. The class count is one more than
    /// the largest label.
    pub fn from_csv(text: &str) -> Result<Self, ObjectiveError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| ObjectiveError::Config("empty dataset CSV".into()))?;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        if columns.last() != Some(&"label") || columns.len() < 2 {
            return Err(ObjectiveError::Config(
                "dataset CSV header must end with `label`".into(),
            ));
        }
        let feature_dim = columns.len() - 1;
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != columns.len() {
                return Err(ObjectiveError::Config(format!(
                    "row {row}: expected {} fields",
                    columns.len()
                )));
            }
            for f in &fields[..feature_dim] {
                inputs.push(f.parse::<f64>().map_err(|e| {
                    ObjectiveError::Config(format!("row {row}: bad feature `{f}`: {e}"))
                })?);
            }
            let label = fields[feature_dim];
            labels.push(label.parse::<usize>().map_err(|e| {
                ObjectiveError::Config(format!("row {row}: bad label `{label}`: {e}"))
            })?);
        }
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(feature_dim, num_classes, inputs, labels)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ObjectiveError> {
        std::fs::write(path, self.to_csv()).map_err(|source| ObjectiveError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self, ObjectiveError> {
        let text = std::fs::read_to_string(path).map_err(|source| ObjectiveError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv(&text)
    }
}

/// Generates a dataset from the `landscape` stream of `spec.seed`.
///
/// Samples are grouped by class; class sizes differ by at most one.
pub fn make_dataset(spec: &DatasetSpec) -> Result<Dataset, ObjectiveError> {
    if spec.size == 0 {
        return Err(ObjectiveError::Config(
            "dataset size must be positive".into(),
        ));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(ObjectiveError::Config(format!(
            "noise {} must be >= 0",
            spec.noise
        )));
    }
    if spec.num_classes == 0 {
        return Err(ObjectiveError::Config("need at least one class".into()));
    }
    if spec.generator == Generator::TwoMoons && spec.num_classes != 2 {
        return Err(ObjectiveError::Config(
            "two_moons has exactly two classes".into(),
        ));
    }
    let k = spec.num_classes;
    let mut rng = RngStream::new(spec.seed, StreamId::Landscape);
    let mut inputs = Vec::with_capacity(spec.size * 2);
    let mut labels = Vec::with_capacity(spec.size);
    for class in 0..k {
        let count = spec.size / k + usize::from(class < spec.size % k);
        for j in 0..count {
            // Position along the class's curve in [0, 1].
            let s = if count > 1 {
                j as f64 / (count - 1) as f64
            } else {
                0.0
            };
            let (x, y) = match spec.generator {
                Generator::Blobs => {
                    let angle = 2.0 * PI * class as f64 / k as f64;
                    (2.0 * angle.cos(), 2.0 * angle.sin())
                }
                Generator::TwoMoons => {
                    let t = PI * s;
                    if class == 0 {
                        (t.cos(), t.sin())
                    } else {
                        (1.0 - t.cos(), 0.5 - t.sin())
                    }
                }
                Generator::Spiral => {
                    let t = 4.0 * (class as f64 + s) + spec.noise * rng.standard_normal();
                    (s * t.sin(), s * t.cos())
                }
            };
            let (dx, dy) = match spec.generator {
                Generator::Spiral => (0.0, 0.0),
                _ => (
                    spec.noise * rng.standard_normal(),
                    spec.noise * rng.standard_normal(),
                ),
            };
            inputs.push(x + dx);
            inputs.push(y + dy);
            labels.push(class);
        }
    }
    Dataset::new(2, k, inputs, labels)
}

/// Minibatch source: uniform sampling without replacement within each
/// epoch. Epoch permutations come only from the stream passed to
/// [`EpochSampler::next_batch`].
///
/// A batch that crosses an epoch boundary finishes the old permutation and
/// continues with a fresh one, so over `T` batches every index is used
/// `floor(TB/N)` or `ceil(TB/N)` times.
#[derive(Debug, Clone)]
pub struct EpochSampler {
    len: usize,
    batch_size: usize,
    order: Vec<usize>,
    cursor: usize,
}

impl EpochSampler {
    pub fn new(len: usize, batch_size: usize) -> Result<Self, ObjectiveError> {
        if batch_size == 0 || batch_size > len {
            return Err(ObjectiveError::Domain(format!(
                "batch size {batch_size} outside [1, {len}]"
            )));
        }
        Ok(Self {
            len,
            batch_size,
            order: Vec::new(),
            cursor: len,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn next_batch(&mut self, rng: &mut RngStream) -> Batch {
        let mut batch = Vec::with_capacity(self.batch_size);
        while batch.len() < self.batch_size {
            if self.cursor == self.len {
                self.order = (0..self.len).collect();
                rng.shuffle(&mut self.order);
                self.cursor = 0;
            }
            let take = (self.batch_size - batch.len()).min(self.len - self.cursor);
            batch.extend_from_slice(&self.order[self.cursor..self.cursor + take]);
            self.cursor += take;
        }
        Batch::Indices(batch)
    }
}
