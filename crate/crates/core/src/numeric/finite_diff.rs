use super::{NumericError, Params, Scalar};

/// Central-difference gradient of `f` at `x` with step `h`.
///
/// Component `i` is `(f(x + h e_i) - f(x - h e_i)) / 2h`. Probe `2i` is the
/// forward probe of coordinate `i`, probe `2i + 1` the backward one.
pub fn central_diff_grad<S, F>(f: F, x: &Params<S>, h: S) -> Result<Params<S>, NumericError>
where
    S: Scalar,
    F: Fn(&Params<S>) -> S,
{
    if !(h > S::zero() && h.is_finite()) {
        return Err(NumericError::Domain(format!(
            "step {h} must be positive and finite"
        )));
    }
    let mut probe = x.as_slice().to_vec();
    let two_h = h + h;
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let xi = probe[i];
        probe[i] = xi + h;
        let fwd = f(&Params::from_vec_unchecked(probe.clone()));
        probe[i] = xi - h;
        let bwd = f(&Params::from_vec_unchecked(probe.clone()));
        probe[i] = xi;
        if !fwd.is_finite() {
            return Err(NumericError::Evaluation { probe: 2 * i });
        }
        if !bwd.is_finite() {
            return Err(NumericError::Evaluation { probe: 2 * i + 1 });
        }
        grad.push((fwd - bwd) / two_h);
    }
    Params::new(grad)
}
