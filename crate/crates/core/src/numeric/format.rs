/// Shortest decimal that parses back to exactly `x`.
///
/// Plain notation for moderate magnitudes, exponent notation (`1e300`,
/// `2.5e-9`) outside `[1e-5, 1e16)`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
