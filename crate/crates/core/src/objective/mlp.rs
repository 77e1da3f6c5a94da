use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_theta, Batch, BatchSpace, Dataset, Objective, ObjectiveError};
use crate::numeric::{Params, RngStream, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl FromStr for Activation {
    type Err = ObjectiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(ObjectiveError::Config(format!(
                "unknown activation `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        })
    }
}

impl Activation {
    fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(S::zero()),
        }
    }

    /// Derivative expressed through the activation's output.
    fn slope_from_output<S: Scalar>(self, a: S) -> S {
        match self {
            Activation::Tanh => S::one() - a * a,
            Activation::Relu => {
                if a > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
        }
    }
}

/// Fully connected network with softmax cross-entropy on the last layer.
///
/// Parameters are flattened layer by layer: the `out x in` weight matrix in
/// row-major order followed by the `out` biases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    activation: Activation,
}

impl Mlp {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self, ObjectiveError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(ObjectiveError::Config(format!(
                "layer sizes {layer_sizes:?} need at least two positive entries"
            )));
        }
        Ok(Self {
            layer_sizes,
            activation,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Weights `N(0, 1/fan_in)`, biases zero.
    pub fn init_params<S: Scalar>(&self, rng: &mut RngStream) -> Params<S> {
        let mut values = Vec::with_capacity(self.param_count());
        for w in self.layer_sizes.windows(2) {
            let scale = 1.0 / (w[0] as f64).sqrt();
            values.extend((0..w[0] * w[1]).map(|_| S::of(scale * rng.standard_normal())));
            values.extend((0..w[1]).map(|_| S::zero()));
        }
        Params::from_vec_unchecked(values)
    }

    /// Forward pass returning every layer's output; the last entry holds
    /// the logits.
    fn forward<S: Scalar>(&self, theta: &[S], x: &[S]) -> Vec<Vec<S>> {
        let layers = self.layer_sizes.len() - 1;
        let mut acts: Vec<Vec<S>> = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        let mut offset = 0;
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &theta[offset..offset + n_in * n_out];
            let bias = &theta[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let input = &acts[l];
            let out: Vec<S> = (0..n_out)
                .map(|o| {
                    let z = weights[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(input)
                        .fold(bias[o], |acc, (&wi, &xi)| acc + wi * xi);
                    if l + 1 < layers {
                        self.activation.apply(z)
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    pub fn logits<S: Scalar>(
        &self,
        theta: &Params<S>,
        x: &[f64],
    ) -> Result<Vec<S>, ObjectiveError> {
        check_theta(self.param_count(), theta)?;
        if x.len() != self.input_dim() {
            return Err(ObjectiveError::Domain(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let x: Vec<S> = x.iter().map(|&v| S::of(v)).collect();
        Ok(self.forward(theta.as_slice(), &x).pop().unwrap())
    }

    /// Index of the largest logit (first one on ties).
    pub fn predict<S: Scalar>(
        &self,
        theta: &Params<S>,
        x: &[f64],
    ) -> Result<usize, ObjectiveError> {
        let logits = self.logits(theta, x)?;
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        Ok(best)
    }

    /// Mean cross-entropy over `samples` and its gradient, accumulated into
    /// `grad`.
    fn loss_and_grad<S: Scalar>(
        &self,
        theta: &[S],
        samples: impl ExactSizeIterator<Item = (Vec<S>, usize)>,
        grad: &mut [S],
    ) -> S {
        let weight = S::one() / S::of(samples.len() as f64);
        let mut loss = S::zero();
        let layers = self.layer_sizes.len() - 1;
        let offsets: Vec<usize> = self
            .layer_sizes
            .windows(2)
            .scan(0, |acc, w| {
                let start = *acc;
                *acc += w[0] * w[1] + w[1];
                Some(start)
            })
            .collect();
        for (x, label) in samples {
            let acts = self.forward(theta, &x);
            let logits = &acts[layers];
            let max = logits.iter().fold(S::neg_infinity(), |m, &v| m.max(v));
            let exps: Vec<S> = logits.iter().map(|&v| (v - max).exp()).collect();
            let total: S = exps.iter().copied().sum();
            loss = loss + (total.ln() + max - logits[label]) * weight;

            let mut delta: Vec<S> = exps
                .iter()
                .enumerate()
                .map(|(k, &e)| {
                    let target = if k == label { S::one() } else { S::zero() };
                    (e / total - target) * weight
                })
                .collect();
            for l in (0..layers).rev() {
                let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
                let off = offsets[l];
                let input = &acts[l];
                for o in 0..n_out {
                    let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                    for (g, &a) in row.iter_mut().zip(input) {
                        *g = *g + delta[o] * a;
                    }
                    grad[off + n_in * n_out + o] = grad[off + n_in * n_out + o] + delta[o];
                }
                if l > 0 {
                    let weights = &theta[off..off + n_in * n_out];
                    delta = (0..n_in)
                        .map(|i| {
                            let back: S =
                                (0..n_out).map(|o| weights[o * n_in + i] * delta[o]).sum();
                            back * self.activation.slope_from_output(input[i])
                        })
                        .collect();
                }
            }
        }
        loss
    }
}

/// Softmax cross-entropy of an [`Mlp`] averaged over a batch of a dataset.
#[derive(Debug, Clone)]
pub struct MlpObjective<S: Scalar> {
    mlp: Mlp,
    dataset: Dataset,
    inputs: Vec<S>,
}

impl<S: Scalar> MlpObjective<S> {
    pub fn new(mlp: Mlp, dataset: Dataset) -> Result<Self, ObjectiveError> {
        if mlp.input_dim() != dataset.feature_dim() {
            return Err(ObjectiveError::Config(format!(
                "network input {} does not match {} dataset features",
                mlp.input_dim(),
                dataset.feature_dim()
            )));
        }
        if mlp.output_dim() < dataset.num_classes() {
            return Err(ObjectiveError::Config(format!(
                "network has {} outputs for {} classes",
                mlp.output_dim(),
                dataset.num_classes()
            )));
        }
        let inputs = dataset.inputs().iter().map(|&v| S::of(v)).collect();
        Ok(Self {
            mlp,
            dataset,
            inputs,
        })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    fn sample(&self, i: usize) -> (Vec<S>, usize) {
        let d = self.dataset.feature_dim();
        (
            self.inputs[i * d..(i + 1) * d].to_vec(),
            self.dataset.labels()[i],
        )
    }
}

impl<S: Scalar> Objective<S> for MlpObjective<S> {
    fn param_dim(&self) -> usize {
        self.mlp.param_count()
    }

    fn batch_space(&self) -> BatchSpace {
        BatchSpace::Indexed {
            len: self.dataset.len(),
        }
    }

    fn value_and_grad(
        &self,
        theta: &Params<S>,
        batch: &Batch,
    ) -> Result<(S, Params<S>), ObjectiveError> {
        check_theta(self.param_dim(), theta)?;
        self.batch_space().check(batch)?;
        let mut grad = vec![S::zero(); self.param_dim()];
        let loss = match batch {
            Batch::Full => self.mlp.loss_and_grad(
                theta.as_slice(),
                (0..self.dataset.len()).map(|i| self.sample(i)),
                &mut grad,
            ),
            Batch::Indices(idx) => self.mlp.loss_and_grad(
                theta.as_slice(),
                idx.iter().map(|&i| self.sample(i)),
                &mut grad,
            ),
        };
        if !loss.is_finite() {
            return Err(ObjectiveError::NonFinite { what: "loss" });
        }
        Ok((loss, Params::new(grad)?))
    }

    fn init_params(&self, rng: &mut RngStream) -> Params<S> {
        self.mlp.init_params(rng)
    }
}
