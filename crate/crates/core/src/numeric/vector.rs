use std::ops::Index;

use super::{NumericError, Scalar};

/// Flat parameter vector: model weights, SAM perturbations and gradients.
///
/// Never empty, and every public constructor and operation rejects
/// non-finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<S: Scalar> {
    values: Vec<S>,
}

impl<S: Scalar> Params<S> {
    pub fn new(values: Vec<S>) -> Result<Self, NumericError> {
        if values.is_empty() {
            return Err(NumericError::Empty);
        }
        check_finite(&values)?;
        Ok(Self { values })
    }

    /// Zero vector of length `len`.
    ///
    /// # Panics
    /// If `len == 0`.
    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "parameter vectors are never empty");
        Self {
            values: vec![S::zero(); len],
        }
    }

    /// Unit basis vector `e_index` of length `len`.
    pub fn basis(len: usize, index: usize) -> Self {
        let mut out = Self::zeros(len);
        out.values[index] = S::one();
        out
    }

    pub fn from_f64(values: &[f64]) -> Result<Self, NumericError> {
        Self::new(values.iter().map(|&v| S::of(v)).collect())
    }

    /// Wraps values already known to be finite (internal fast path).
    pub(crate) fn from_vec_unchecked(values: Vec<S>) -> Self {
        debug_assert!(!values.is_empty());
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; present for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<S> {
        self.values
    }

    pub fn iter(&self) -> std::slice::Iter<'_, S> {
        self.values.iter()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.as_f64()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    pub fn norm(&self) -> S {
        l2_norm(self)
    }

    pub fn dot(&self, other: &Self) -> Result<S, NumericError> {
        check_len(self.len(), other.len())?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum())
    }

    pub fn scaled(&self, a: S) -> Result<Self, NumericError> {
        let values: Vec<S> = self.values.iter().map(|&v| a * v).collect();
        check_finite(&values)?;
        Ok(Self { values })
    }

    /// `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self, NumericError> {
        axpy(S::one(), other, self)
    }

    /// `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self, NumericError> {
        axpy(-S::one(), other, self)
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<S, NumericError> {
        check_len(self.len(), other.len())?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }
}

impl<S: Scalar> Index<usize> for Params<S> {
    type Output = S;

    fn index(&self, index: usize) -> &S {
        &self.values[index]
    }
}

impl<'a, S: Scalar> IntoIterator for &'a Params<S> {
    type Item = &'a S;
    type IntoIter = std::slice::Iter<'a, S>;

    fn into_iter(self) -> Self::IntoIter {
        self.values.iter()
    }
}

/// `a * x + y`, componentwise.
pub fn axpy<S: Scalar>(a: S, x: &Params<S>, y: &Params<S>) -> Result<Params<S>, NumericError> {
    check_len(y.len(), x.len())?;
    if !a.is_finite() {
        return Err(NumericError::Domain(format!(
            "axpy coefficient {a} is not finite"
        )));
    }
    let values: Vec<S> = x
        .values
        .iter()
        .zip(&y.values)
        .map(|(&xi, &yi)| a * xi + yi)
        .collect();
    check_finite(&values)?;
    Ok(Params { values })
}

/// Euclidean norm. Falls back to a rescaled sum when squaring would
/// overflow or underflow.
pub fn l2_norm<S: Scalar>(x: &Params<S>) -> S {
    let plain = x.values.iter().map(|&v| v * v).sum::<S>().sqrt();
    if plain.is_finite() && plain > S::min_positive_value().sqrt() {
        return plain;
    }
    let scale = x.values.iter().fold(S::zero(), |m, v| m.max(v.abs()));
    if scale.is_zero() {
        return S::zero();
    }
    let sum: S = x
        .values
        .iter()
        .map(|&v| {
            let r = v / scale;
            r * r
        })
        .sum();
    scale * sum.sqrt()
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<(), NumericError> {
    if expected != found {
        return Err(NumericError::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_finite<S: Scalar>(values: &[S]) -> Result<(), NumericError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(NumericError::NonFinite { index }),
        None => Ok(()),
    }
}
