use super::{check_theta, Batch, Objective, ObjectiveError};
use crate::numeric::{Params, RngStream, Scalar};

/// One-dimensional double well with a flat and a sharp minimum of equal
/// depth, extended to more dimensions by a convex quadratic
/// `0.5 * |theta[1..]|^2` in the remaining coordinates.
///
/// The profile in coordinate 0 is assembled from four polynomial pieces.
/// On the outer side of each center the well is the parabola
/// `-depth + k u^2 / 2`; between a center and the ridge it is the quartic
/// `-depth + k u^2 / 2 + c3 u^3 + c4 u^4`, with coefficients chosen so that
/// value, slope and curvature all match at the ridge (value 0, slope 0,
/// curvature `-flat_curvature`). The profile is twice continuously
/// differentiable everywhere.
///
/// The depth is fixed by the two centers and curvatures: each well's ridge
/// distance is `sqrt(12 depth / (k + flat_curvature))`, and the two
/// distances must add up to the center separation.
#[derive(Debug, Clone)]
pub struct TwoWell<S: Scalar> {
    flat: Well<S>,
    sharp: Well<S>,
    depth: S,
    ridge: S,
    transverse_dims: usize,
}

#[derive(Debug, Clone)]
struct Well<S: Scalar> {
    center: S,
    curvature: S,
    /// +1 if the ridge lies at larger coordinate than the center.
    toward_ridge: S,
    cubic: S,
    quartic: S,
}

impl<S: Scalar> Well<S> {
    /// Profile value and derivative with respect to coordinate 0.
    fn eval(&self, x: S, depth: S) -> (S, S) {
        let half = S::of(0.5);
        let u = (x - self.center) * self.toward_ridge;
        let (v, dv) = if u <= S::zero() {
            (half * self.curvature * u * u, self.curvature * u)
        } else {
            let u2 = u * u;
            (
                half * self.curvature * u2 + self.cubic * u2 * u + self.quartic * u2 * u2,
                self.curvature * u
                    + S::of(3.0) * self.cubic * u2
                    + S::of(4.0) * self.quartic * u2 * u,
            )
        };
        (v - depth, dv * self.toward_ridge)
    }
}

impl<S: Scalar> TwoWell<S> {
    pub fn new(
        flat_center: f64,
        sharp_center: f64,
        flat_curvature: f64,
        sharp_curvature: f64,
        transverse_dims: usize,
    ) -> Result<Self, ObjectiveError> {
        if !(flat_center.is_finite() && sharp_center.is_finite()) || flat_center == sharp_center {
            return Err(ObjectiveError::Config(
                "well centers must be finite and distinct".into(),
            ));
        }
        if !(flat_curvature > 0.0 && flat_curvature.is_finite()) {
            return Err(ObjectiveError::Config(format!(
                "flat curvature {flat_curvature} must be positive"
            )));
        }
        if !(sharp_curvature > flat_curvature && sharp_curvature.is_finite()) {
            return Err(ObjectiveError::Config(format!(
                "sharp curvature {sharp_curvature} must exceed flat curvature {flat_curvature}"
            )));
        }
        let ridge_curv = flat_curvature;
        let gap = (sharp_center - flat_center).abs();
        let inv = 1.0 / (flat_curvature + ridge_curv).sqrt()
            + 1.0 / (sharp_curvature + ridge_curv).sqrt();
        let depth = (gap / inv).powi(2) / 12.0;
        let radius = |k: f64| (12.0 * depth / (k + ridge_curv)).sqrt();
        let r_flat = radius(flat_curvature);
        let dir = (sharp_center - flat_center).signum();
        let ridge = flat_center + dir * r_flat;
        let well = |center: f64, k: f64, toward: f64| {
            let r = radius(k);
            Well {
                center: S::of(center),
                curvature: S::of(k),
                toward_ridge: S::of(toward),
                cubic: S::of(-(2.0 * k - ridge_curv) / (3.0 * r)),
                quartic: S::of((k - ridge_curv) / (4.0 * r * r)),
            }
        };
        Ok(Self {
            flat: well(flat_center, flat_curvature, dir),
            sharp: well(sharp_center, sharp_curvature, -dir),
            depth: S::of(depth),
            ridge: S::of(ridge),
            transverse_dims,
        })
    }

    pub fn flat_center(&self) -> S {
        self.flat.center
    }

    pub fn sharp_center(&self) -> S {
        self.sharp.center
    }

    pub fn flat_curvature(&self) -> S {
        self.flat.curvature
    }

    pub fn sharp_curvature(&self) -> S {
        self.sharp.curvature
    }

    /// Loss at either center is `-depth`; the ridge sits at 0.
    pub fn depth(&self) -> S {
        self.depth
    }

    /// Coordinate of the barrier between the wells.
    pub fn ridge(&self) -> S {
        self.ridge
    }

    /// True if coordinate 0 lies on the flat well's side of the ridge.
    pub fn in_flat_basin(&self, theta: &Params<S>) -> bool {
        (theta[0] - self.ridge) * self.flat.toward_ridge < S::zero()
    }

    /// Point at the bottom of the flat well (transverse coordinates zero).
    pub fn flat_minimum(&self) -> Params<S> {
        self.point(self.flat.center)
    }

    pub fn sharp_minimum(&self) -> Params<S> {
        self.point(self.sharp.center)
    }

    fn point(&self, x0: S) -> Params<S> {
        let mut v = vec![S::zero(); self.param_dim()];
        v[0] = x0;
        Params::from_vec_unchecked(v)
    }

    /// Value and slope of the one-dimensional profile.
    pub fn profile(&self, x: S) -> (S, S) {
        let on_flat_side = (x - self.ridge) * self.flat.toward_ridge <= S::zero();
        if on_flat_side {
            self.flat.eval(x, self.depth)
        } else {
            self.sharp.eval(x, self.depth)
        }
    }
}

impl<S: Scalar> Objective<S> for TwoWell<S> {
    fn param_dim(&self) -> usize {
        1 + self.transverse_dims
    }

    fn value_and_grad(
        &self,
        theta: &Params<S>,
        batch: &Batch,
    ) -> Result<(S, Params<S>), ObjectiveError> {
        check_theta(self.param_dim(), theta)?;
        self.batch_space().check(batch)?;
        let (mut loss, slope) = self.profile(theta[0]);
        let mut grad = Vec::with_capacity(theta.len());
        grad.push(slope);
        for &x in &theta.as_slice()[1..] {
            loss = loss + S::of(0.5) * x * x;
            grad.push(x);
        }
        if !loss.is_finite() {
            return Err(ObjectiveError::NonFinite { what: "loss" });
        }
        Ok((loss, Params::new(grad)?))
    }

    /// Coordinate 0 uniform within one center separation of the ridge, so
    /// both basins are equally likely; other coordinates standard normal.
    fn init_params(&self, rng: &mut RngStream) -> Params<S> {
        let gap = (self.sharp.center - self.flat.center).abs().as_f64();
        let ridge = self.ridge.as_f64();
        let mut v = Vec::with_capacity(self.param_dim());
        v.push(S::of(rng.uniform_in(ridge - gap, ridge + gap)));
        v.extend((0..self.transverse_dims).map(|_| S::of(rng.standard_normal())));
        Params::from_vec_unchecked(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{central_diff_grad, StreamId};

    fn landscape() -> TwoWell<f64> {
        TwoWell::new(-1.0, 1.0, 1.0, 25.0, 1).unwrap()
    }

    fn second_diff(w: &TwoWell<f64>, x: f64, h: f64) -> f64 {
        let f = |x: f64| w.profile(x).0;
        (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
    }

    #[test]
    fn wells_have_equal_depth_and_are_stationary() {
        let w = landscape();
        let (lf, gf) = w.value_and_grad(&w.flat_minimum(), &Batch::Full).unwrap();
        let (ls, gs) = w.value_and_grad(&w.sharp_minimum(), &Batch::Full).unwrap();
        assert!((lf - ls).abs() < 1e-12);
        assert!((lf + w.depth()).abs() < 1e-12);
        assert!(gf.norm() < 1e-10 && gs.norm() < 1e-10);
        assert!(w.profile(w.ridge()).0.abs() < 1e-12);
    }

    #[test]
    fn curvature_ratio_matches_construction() {
        let w = landscape();
        let kf = second_diff(&w, -1.0, 1e-4);
        let ks = second_diff(&w, 1.0, 1e-4);
        assert!(ks > kf);
        let ratio = ks / kf;
        assert!((ratio / 25.0 - 1.0).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn profile_is_c2_at_the_ridge() {
        let w = landscape();
        let r = w.ridge();
        let (_, slope) = w.profile(r);
        assert!(slope.abs() < 1e-12);
        let left = second_diff(&w, r - 1e-5, 2e-6);
        let right = second_diff(&w, r + 1e-5, 2e-6);
        assert!(
            (left + 1.0).abs() < 0.01 && (right + 1.0).abs() < 0.01,
            "{left} {right}"
        );
    }

    #[test]
    fn each_basin_is_monotone_toward_its_center() {
        let w = landscape();
        let r = w.ridge();
        let n = 2000;
        for i in 1..n {
            let x = -3.0 + 6.0 * i as f64 / n as f64;
            let (_, slope) = w.profile(x);
            if x < -1.0 || (x > r && x < 1.0) {
                assert!(slope < 0.0, "x={x} slope={slope}");
            } else if (x > -1.0 && x < r) || x > 1.0 {
                assert!(slope > 0.0, "x={x} slope={slope}");
            }
        }
    }

    #[test]
    fn mirrored_orientation() {
        let w = TwoWell::<f64>::new(2.0, -0.5, 0.5, 8.0, 0).unwrap();
        assert!(w.ridge() < 2.0 && w.ridge() > -0.5);
        assert!(w.in_flat_basin(&w.flat_minimum()));
        assert!(!w.in_flat_basin(&w.sharp_minimum()));
        let (lf, _) = w.value_and_grad(&w.flat_minimum(), &Batch::Full).unwrap();
        let (ls, _) = w.value_and_grad(&w.sharp_minimum(), &Batch::Full).unwrap();
        assert!((lf - ls).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let w = TwoWell::<f64>::new(-1.0, 1.0, 1.0, 25.0, 3).unwrap();
        let mut rng = RngStream::new(1, StreamId::Init);
        for _ in 0..20 {
            let theta = w.init_params(&mut rng);
            let (_, g) = w.value_and_grad(&theta, &Batch::Full).unwrap();
            let fd = central_diff_grad(
                |p: &Params<f64>| w.value(p, &Batch::Full).unwrap(),
                &theta,
                1e-5,
            )
            .unwrap();
            let rel = g.sub(&fd).unwrap().norm() / g.norm().max(1e-12);
            assert!(rel < 1e-5, "theta {theta:?}: rel {rel}");
        }
    }

    #[test]
    fn rejects_invalid_shapes() {
        assert!(TwoWell::<f64>::new(0.0, 0.0, 1.0, 2.0, 0).is_err());
        assert!(TwoWell::<f64>::new(0.0, 1.0, 2.0, 1.0, 0).is_err());
        assert!(TwoWell::<f64>::new(0.0, 1.0, 0.0, 1.0, 0).is_err());
    }
}
