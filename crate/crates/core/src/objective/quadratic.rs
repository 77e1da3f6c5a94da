use super::{check_theta, Batch, Objective, ObjectiveError};
use crate::numeric::{Params, RngStream, Scalar};

/// `L(theta) = 0.5 (theta - c)^T A (theta - c)` for symmetric `A`.
#[derive(Debug, Clone)]
pub struct Quadratic<S: Scalar> {
    dim: usize,
    /// Row-major `dim x dim`.
    matrix: Vec<S>,
    center: Vec<S>,
}

impl<S: Scalar> Quadratic<S> {
    /// `0.5 * curvature * |theta|^2`.
    pub fn isotropic(dim: usize, curvature: f64) -> Result<Self, ObjectiveError> {
        Self::diagonal(&vec![curvature; dim])
    }

    pub fn diagonal(curvatures: &[f64]) -> Result<Self, ObjectiveError> {
        let n = curvatures.len();
        let mut matrix = vec![0.0; n * n];
        for (i, &c) in curvatures.iter().enumerate() {
            matrix[i * n + i] = c;
        }
        Self::symmetric(n, &matrix)
    }

    /// From a row-major symmetric matrix.
    pub fn symmetric(dim: usize, matrix: &[f64]) -> Result<Self, ObjectiveError> {
        if dim == 0 {
            return Err(ObjectiveError::Config(
                "quadratic needs at least one dimension".into(),
            ));
        }
        if matrix.len() != dim * dim {
            return Err(ObjectiveError::Config(format!(
                "expected {} matrix entries, got {}",
                dim * dim,
                matrix.len()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(ObjectiveError::NonFinite {
                what: "quadratic matrix",
            });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (matrix[i * dim + j], matrix[j * dim + i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(ObjectiveError::Config(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            dim,
            matrix: matrix.iter().map(|&v| S::of(v)).collect(),
            center: vec![S::zero(); dim],
        })
    }

    /// `A = H diag(eigenvalues) H` with `H` a Householder reflection drawn
    /// from `rng`. The spectrum is known exactly while the eigenvectors are
    /// not axis aligned.
    pub fn with_spectrum(eigenvalues: &[f64], rng: &mut RngStream) -> Result<Self, ObjectiveError> {
        let n = eigenvalues.len();
        let v: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let norm_sq: f64 = v.iter().map(|x| x * x).sum();
        let h = |i: usize, j: usize| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - 2.0 * v[i] * v[j] / norm_sq
        };
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                matrix[i * n + j] = (0..n).map(|k| h(i, k) * eigenvalues[k] * h(k, j)).sum();
            }
        }
        // Symmetrize away rounding.
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (matrix[i * n + j] + matrix[j * n + i]);
                matrix[i * n + j] = avg;
                matrix[j * n + i] = avg;
            }
        }
        Self::symmetric(n, &matrix)
    }

    pub fn with_center(mut self, center: &[f64]) -> Result<Self, ObjectiveError> {
        if center.len() != self.dim {
            return Err(ObjectiveError::Config(format!(
                "center has {} entries, expected {}",
                center.len(),
                self.dim
            )));
        }
        self.center = center.iter().map(|&v| S::of(v)).collect();
        Ok(self)
    }

    pub fn entry(&self, i: usize, j: usize) -> S {
        self.matrix[i * self.dim + j]
    }
}

impl<S: Scalar> Objective<S> for Quadratic<S> {
    fn param_dim(&self) -> usize {
        self.dim
    }

    fn value_and_grad(
        &self,
        theta: &Params<S>,
        batch: &Batch,
    ) -> Result<(S, Params<S>), ObjectiveError> {
        check_theta(self.dim, theta)?;
        self.batch_space().check(batch)?;
        let d: Vec<S> = theta
            .iter()
            .zip(&self.center)
            .map(|(&t, &c)| t - c)
            .collect();
        let grad: Vec<S> = (0..self.dim)
            .map(|i| {
                let row = &self.matrix[i * self.dim..(i + 1) * self.dim];
                row.iter().zip(&d).map(|(&a, &x)| a * x).sum()
            })
            .collect();
        let loss = S::of(0.5) * d.iter().zip(&grad).map(|(&x, &g)| x * g).sum::<S>();
        if !loss.is_finite() {
            return Err(ObjectiveError::NonFinite { what: "loss" });
        }
        Ok((loss, Params::new(grad)?))
    }

    fn init_params(&self, rng: &mut RngStream) -> Params<S> {
        Params::from_vec_unchecked(
            (0..self.dim)
                .map(|_| S::of(rng.standard_normal()))
                .collect(),
        )
    }
}

/// `L(theta) = c^T theta`.
#[derive(Debug, Clone)]
pub struct Linear<S: Scalar> {
    coeffs: Params<S>,
}

impl<S: Scalar> Linear<S> {
    pub fn new(coeffs: &[f64]) -> Result<Self, ObjectiveError> {
        Ok(Self {
            coeffs: Params::from_f64(coeffs)?,
        })
    }
}

impl<S: Scalar> Objective<S> for Linear<S> {
    fn param_dim(&self) -> usize {
        self.coeffs.len()
    }

    fn value_and_grad(
        &self,
        theta: &Params<S>,
        batch: &Batch,
    ) -> Result<(S, Params<S>), ObjectiveError> {
        check_theta(self.coeffs.len(), theta)?;
        self.batch_space().check(batch)?;
        Ok((self.coeffs.dot(theta)?, self.coeffs.clone()))
    }

    fn init_params(&self, rng: &mut RngStream) -> Params<S> {
        Params::from_vec_unchecked(
            (0..self.coeffs.len())
                .map(|_| S::of(rng.standard_normal()))
                .collect(),
        )
    }
}
