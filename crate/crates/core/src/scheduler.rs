//! Scheduling functions `p(t)` giving the probability of a SAM step at
//! update `t`, and the expected average propagation count they imply.
//!
//! Schedules are plain configuration values in `f64`; the total step count
//! `T` is supplied at evaluation time because several families (piecewise
//! boundaries, linear two-point forms, trigonometric periods) scale with it.
//!
//! The expected count is `1 + mean_t p(t)` over the `T` steps
//! `t = 0..T-1` actually performed. Closed forms follow each family's
//! analytic summation:
//!
//! | family      | closed form                       | gap to exact sum |
//! |-------------|-----------------------------------|------------------|
//! | constant    | `1 + a_c`                         | rounding only    |
//! | piecewise   | `2 + 2 a_p b_p - b_p - a_p`       | `<= 2/T`         |
//! | linear      | `1 + p(T/2)`                      | `<= 1/T`         |
//! | cos1, cos2  | `3/2`                             | `<= 1/T`         |
//! | sin1        | `1 + cot(pi/2T)/T`                | rounding only    |
//! | sin2        | `2 - cot(pi/2T)/T`                | rounding only    |
//!
//! The sine rows use `sum_{t=0}^{T-1} sin(t pi/T) = cot(pi/2T)`, so their
//! expectation tends to `1 +/- 2/pi`, not `3/2`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("cannot parse schedule `{input}`: {reason}")]
    Parse { input: String, reason: String },
    #[error("invalid schedule parameter: {0}")]
    Parameter(String),
    #[error("step {t} outside [0, {total})")]
    StepOutOfRange { t: usize, total: usize },
    #[error("total steps must be at least 1")]
    NoSteps,
    #[error("schedule {schedule} leaves [0, 1] at step {t} of {total} (p = {p})")]
    NotAProbability {
        schedule: String,
        t: usize,
        total: usize,
        p: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Constant,
    Piecewise,
    Linear,
    Trig,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Constant => "constant",
            Family::Piecewise => "piecewise",
            Family::Linear => "linear",
            Family::Trig => "trig",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrigVariant {
    /// `1/2 + cos(t pi/T)/2`: SAM-heavy early.
    Cos1,
    /// `1/2 - cos(t pi/T)/2`: SAM-heavy late.
    Cos2,
    /// `sin(t pi/T)`: SAM-heavy mid-run.
    Sin1,
    /// `1 - sin(t pi/T)`.
    Sin2,
}

impl TrigVariant {
    fn name(self) -> &'static str {
        match self {
            TrigVariant::Cos1 => "cos1",
            TrigVariant::Cos2 => "cos2",
            TrigVariant::Sin1 => "sin1",
            TrigVariant::Sin2 => "sin2",
        }
    }
}

/// How a linear schedule `p(t) = a_l t + b_l` is pinned down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearForm {
    /// Explicit per-step slope and intercept.
    Coefficients { slope: f64, intercept: f64 },
    /// Through `(T/2, mid)` and `(0, 0)` when `mid <= 1/2`, otherwise
    /// through `(T/2, mid)` and `(T, 1)`; the other anchor would push
    /// `p` outside `[0, 1]`.
    Midpoint { mid: f64 },
    /// Through `(T/2, mid)` and `(0, intercept)`.
    MidpointIntercept { mid: f64, intercept: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant {
        a_c: f64,
    },
    /// `a_p` while `t <= b_p T`, then `1 - a_p`.
    Piecewise {
        a_p: f64,
        b_p: f64,
    },
    Linear(LinearForm),
    Trig(TrigVariant),
}

/// Values within this distance outside `[0, 1]` are treated as rounding
/// and clamped.
const PROBABILITY_SLACK: f64 = 1e-12;

fn unit_interval(name: &str, v: f64) -> Result<f64, ScheduleError> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(ScheduleError::Parameter(format!(
            "{name} = {v} outside [0, 1]"
        )))
    }
}

impl Schedule {
    pub fn constant(a_c: f64) -> Result<Self, ScheduleError> {
        Ok(Schedule::Constant {
            a_c: unit_interval("a_c", a_c)?,
        })
    }

    pub fn piecewise(a_p: f64, b_p: f64) -> Result<Self, ScheduleError> {
        Ok(Schedule::Piecewise {
            a_p: unit_interval("a_p", a_p)?,
            b_p: unit_interval("b_p", b_p)?,
        })
    }

    /// Linear schedule from explicit coefficients. Whether it stays a
    /// probability depends on `T`; see [`Schedule::validate`].
    pub fn linear(slope: f64, intercept: f64) -> Result<Self, ScheduleError> {
        if !(slope.is_finite() && intercept.is_finite()) {
            return Err(ScheduleError::Parameter(
                "linear coefficients must be finite".into(),
            ));
        }
        Ok(Schedule::Linear(LinearForm::Coefficients {
            slope,
            intercept,
        }))
    }

    pub fn linear_midpoint(mid: f64) -> Result<Self, ScheduleError> {
        Ok(Schedule::Linear(LinearForm::Midpoint {
            mid: unit_interval("mid", mid)?,
        }))
    }

    pub fn linear_midpoint_intercept(mid: f64, intercept: f64) -> Result<Self, ScheduleError> {
        Ok(Schedule::Linear(LinearForm::MidpointIntercept {
            mid: unit_interval("mid", mid)?,
            intercept: unit_interval("b_l", intercept)?,
        }))
    }

    pub fn trig(variant: TrigVariant) -> Self {
        Schedule::Trig(variant)
    }

    pub fn family(&self) -> Family {
        match self {
            Schedule::Constant { .. } => Family::Constant,
            Schedule::Piecewise { .. } => Family::Piecewise,
            Schedule::Linear(_) => Family::Linear,
            Schedule::Trig(_) => Family::Trig,
        }
    }

    /// Per-step slope and intercept of a linear schedule for `total` steps.
    pub fn linear_coefficients(&self, total: usize) -> Option<(f64, f64)> {
        let t = total as f64;
        match *self {
            Schedule::Linear(LinearForm::Coefficients { slope, intercept }) => {
                Some((slope, intercept))
            }
            Schedule::Linear(LinearForm::Midpoint { mid }) if mid <= 0.5 => {
                Some((2.0 * mid / t, 0.0))
            }
            Schedule::Linear(LinearForm::Midpoint { mid }) => {
                Some((2.0 * (1.0 - mid) / t, 2.0 * mid - 1.0))
            }
            Schedule::Linear(LinearForm::MidpointIntercept { mid, intercept }) => {
                Some((2.0 * (mid - intercept) / t, intercept))
            }
            _ => None,
        }
    }

    /// Last step of the first piecewise stage: `floor(b_p T)`, with products
    /// within `1e-9` of an integer snapped to it.
    fn piecewise_edge(b_p: f64, total: usize) -> f64 {
        let edge = b_p * total as f64;
        let nearest = edge.round();
        if (edge - nearest).abs() < 1e-9 {
            nearest
        } else {
            edge.floor()
        }
    }

    fn raw(&self, t: usize, total: usize) -> f64 {
        let tf = t as f64;
        let phase = tf * PI / total as f64;
        match *self {
            Schedule::Constant { a_c } => a_c,
            Schedule::Piecewise { a_p, b_p } => {
                if tf <= Self::piecewise_edge(b_p, total) {
                    a_p
                } else {
                    1.0 - a_p
                }
            }
            Schedule::Linear(_) => {
                let (slope, intercept) = self.linear_coefficients(total).unwrap();
                slope * tf + intercept
            }
            Schedule::Trig(TrigVariant::Cos1) => 0.5 + 0.5 * phase.cos(),
            Schedule::Trig(TrigVariant::Cos2) => 0.5 - 0.5 * phase.cos(),
            Schedule::Trig(TrigVariant::Sin1) => phase.sin(),
            Schedule::Trig(TrigVariant::Sin2) => 1.0 - phase.sin(),
        }
    }

    /// Checks that `p(t)` is a probability for every `t` in `[0, total)`.
    pub fn validate(&self, total: usize) -> Result<(), ScheduleError> {
        if total == 0 {
            return Err(ScheduleError::NoSteps);
        }
        // Only linear schedules can leave [0, 1]; they are monotone, so the
        // endpoints decide.
        if let Schedule::Linear(_) = self {
            for t in [0, total - 1] {
                let p = self.raw(t, total);
                if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&p) {
                    return Err(ScheduleError::NotAProbability {
                        schedule: self.to_string(),
                        t,
                        total,
                        p,
                    });
                }
            }
        }
        Ok(())
    }

    /// `p(t)` for step `t` of `total`.
    pub fn eval(&self, t: usize, total: usize) -> Result<f64, ScheduleError> {
        if t >= total {
            return Err(ScheduleError::StepOutOfRange { t, total });
        }
        Ok(self.raw(t, total).clamp(0.0, 1.0))
    }

    /// Expected propagation count of step `t`: `1 + p(t)`.
    pub fn eta_of_step(&self, t: usize, total: usize) -> Result<f64, ScheduleError> {
        Ok(1.0 + self.eval(t, total)?)
    }

    /// `1 + (1/T) sum_{t=0}^{T-1} p(t)` by direct summation.
    pub fn expected_eta_exact(&self, total: usize) -> Result<f64, ScheduleError> {
        self.validate(total)?;
        let sum: f64 = (0..total).map(|t| self.raw(t, total).clamp(0.0, 1.0)).sum();
        Ok(1.0 + sum / total as f64)
    }

    /// The family's closed-form expectation (see the module table).
    pub fn expected_eta_closed_form(&self, total: usize) -> Result<f64, ScheduleError> {
        self.validate(total)?;
        let cot_term = || {
            let x = PI / (2.0 * total as f64);
            x.cos() / x.sin() / total as f64
        };
        Ok(match *self {
            Schedule::Constant { a_c } => 1.0 + a_c,
            Schedule::Piecewise { a_p, b_p } => 2.0 + 2.0 * a_p * b_p - b_p - a_p,
            Schedule::Linear(LinearForm::Midpoint { mid }) => 1.0 + mid,
            Schedule::Linear(LinearForm::MidpointIntercept { mid, .. }) => 1.0 + mid,
            Schedule::Linear(LinearForm::Coefficients { slope, intercept }) => {
                1.0 + slope * total as f64 / 2.0 + intercept
            }
            Schedule::Trig(TrigVariant::Cos1 | TrigVariant::Cos2) => 1.5,
            Schedule::Trig(TrigVariant::Sin1) => 1.0 + cot_term(),
            Schedule::Trig(TrigVariant::Sin2) => 2.0 - cot_term(),
        })
    }

    pub fn eta_report(&self, total: usize) -> Result<EtaReport, ScheduleError> {
        Ok(EtaReport {
            exact: self.expected_eta_exact(total)?,
            closed_form: self.expected_eta_closed_form(total)?,
            family: self.family(),
            total_steps: total,
        })
    }
}

/// Expected average propagation count of a schedule over `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaReport {
    pub exact: f64,
    pub closed_form: f64,
    pub family: Family,
    pub total_steps: usize,
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Constant { a_c } => write!(f, "constant(a_c={a_c})"),
            Schedule::Piecewise { a_p, b_p } => write!(f, "piecewise(a_p={a_p},b_p={b_p})"),
            Schedule::Linear(LinearForm::Coefficients { slope, intercept }) => {
                write!(f, "linear(a_l={slope},b_l={intercept})")
            }
            Schedule::Linear(LinearForm::Midpoint { mid }) => write!(f, "linear(mid={mid})"),
            Schedule::Linear(LinearForm::MidpointIntercept { mid, intercept }) => {
                write!(f, "linear(mid={mid},b_l={intercept})")
            }
            Schedule::Trig(v) => write!(f, "trig({})", v.name()),
        }
    }
}

impl FromStr for Schedule {
    type Err = ScheduleError;

    /// Parses the canonical form written by `Display`, plus the shorthands
    /// `sgd` (= `constant(a_c=0)`) and `sam` (= `constant(a_c=1)`).
    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let fail = |reason: &str| ScheduleError::Parse {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        match s.as_str() {
            "sgd" => return Schedule::constant(0.0),
            "sam" => return Schedule::constant(1.0),
            _ => {}
        }
        let open = s.find('(').ok_or_else(|| fail("expected `family(args)`"))?;
        if !s.ends_with(')') {
            return Err(fail("missing closing parenthesis"));
        }
        let family = &s[..open];
        let body = &s[open + 1..s.len() - 1];

        if family == "trig" {
            let variant = match body {
                "cos1" => TrigVariant::Cos1,
                "cos2" => TrigVariant::Cos2,
                "sin1" => TrigVariant::Sin1,
                "sin2" => TrigVariant::Sin2,
                _ => return Err(fail("trig variant must be cos1, cos2, sin1 or sin2")),
            };
            return Ok(Schedule::Trig(variant));
        }

        let mut args: Vec<(&str, f64)> = Vec::new();
        for part in body.split(',').filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| fail("arguments are `key=value`"))?;
            let value: f64 = value
                .parse()
                .map_err(|_| fail(&format!("`{value}` is not a number")))?;
            if args.iter().any(|(k, _)| *k == key) {
                return Err(fail(&format!("duplicate argument `{key}`")));
            }
            args.push((key, value));
        }
        let mut keys: Vec<&str> = args.iter().map(|(k, _)| *k).collect();
        keys.sort_unstable();
        let get = |name: &str| {
            args.iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .unwrap()
        };

        match (family, keys.as_slice()) {
            ("constant", ["a_c"]) => Schedule::constant(get("a_c")),
            ("piecewise", ["a_p", "b_p"]) => Schedule::piecewise(get("a_p"), get("b_p")),
            ("linear", ["mid"]) => Schedule::linear_midpoint(get("mid")),
            ("linear", ["b_l", "mid"]) => {
                Schedule::linear_midpoint_intercept(get("mid"), get("b_l"))
            }
            ("linear", ["a_l", "b_l"]) => Schedule::linear(get("a_l"), get("b_l")),
            ("constant" | "piecewise" | "linear", _) => Err(fail("unexpected argument set")),
            _ => Err(fail(&format!("unknown family `{family}`"))),
        }
    }
}

impl Serialize for Schedule {
    fn serialize<Ser: serde::Serializer>(&self, serializer: Ser) -> Result<Ser::Ok, Ser::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Schedule {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: plain left-to-right summation of the defining
    /// formulas, written without going through `Schedule`.
    fn oracle_sum(f: impl Fn(f64, f64) -> f64, total: usize) -> f64 {
        let tt = total as f64;
        let mut s = 0.0;
        for t in 0..total {
            s += f(t as f64, tt);
        }
        1.0 + s / tt
    }

    #[test]
    fn eval_examples() {
        let c = Schedule::constant(0.6).unwrap();
        assert_eq!(c.eval(0, 100).unwrap(), 0.6);
        assert_eq!(c.eval(99, 100).unwrap(), 0.6);
        let cos1 = Schedule::trig(TrigVariant::Cos1);
        assert!((cos1.eval(50, 100).unwrap() - 0.5).abs() < 1e-15);
        let pw = Schedule::piecewise(0.0, 0.5).unwrap();
        assert_eq!(pw.eval(25, 100).unwrap(), 0.0);
        assert_eq!(pw.eval(75, 100).unwrap(), 1.0);
        assert!(matches!(
            c.eval(100, 100),
            Err(ScheduleError::StepOutOfRange { .. })
        ));
    }

    #[test]
    fn piecewise_boundary_is_inclusive() {
        let pw = Schedule::piecewise(0.0, 0.7).unwrap();
        assert_eq!(pw.eval(7000, 10_000).unwrap(), 0.0);
        assert_eq!(pw.eval(7001, 10_000).unwrap(), 1.0);
        let pw = Schedule::piecewise(1.0, 0.3).unwrap();
        assert_eq!(pw.eval(3, 10).unwrap(), 1.0);
        assert_eq!(pw.eval(4, 10).unwrap(), 0.0);
    }

    #[test]
    fn exact_eta_examples() {
        assert_eq!(
            Schedule::constant(0.0)
                .unwrap()
                .expected_eta_exact(1000)
                .unwrap(),
            1.0
        );
        assert_eq!(
            Schedule::constant(1.0)
                .unwrap()
                .expected_eta_exact(1000)
                .unwrap(),
            2.0
        );
        let sin1 = Schedule::trig(TrigVariant::Sin1)
            .expected_eta_exact(10_000)
            .unwrap();
        let oracle = oracle_sum(|t, tt| (t * PI / tt).sin(), 10_000);
        assert!((sin1 - oracle).abs() < 1e-12);
        assert!((sin1 - 1.63662).abs() < 1e-5, "{sin1}");
    }

    #[test]
    fn closed_form_examples() {
        let t = 10_000;
        let pw = Schedule::piecewise(0.0, 0.1)
            .unwrap()
            .expected_eta_closed_form(t)
            .unwrap();
        assert!((pw - 1.9).abs() < 1e-12);
        let lin = Schedule::linear_midpoint(0.3)
            .unwrap()
            .expected_eta_closed_form(t)
            .unwrap();
        assert!((lin - 1.3).abs() < 1e-12);
        let cos2 = Schedule::trig(TrigVariant::Cos2)
            .expected_eta_closed_form(t)
            .unwrap();
        assert_eq!(cos2, 1.5);
    }

    #[test]
    fn eta_of_step_examples() {
        assert_eq!(
            Schedule::constant(0.0).unwrap().eta_of_step(3, 10).unwrap(),
            1.0
        );
        assert_eq!(
            Schedule::constant(1.0).unwrap().eta_of_step(3, 10).unwrap(),
            2.0
        );
        assert_eq!(
            Schedule::constant(0.6).unwrap().eta_of_step(3, 10).unwrap(),
            1.6
        );
    }

    #[test]
    fn sine_closed_forms_match_summation() {
        for &t in &[10usize, 100, 10_000] {
            for (variant, f) in [
                (
                    TrigVariant::Sin1,
                    (|t: f64, tt: f64| (t * PI / tt).sin()) as fn(f64, f64) -> f64,
                ),
                (TrigVariant::Sin2, |t: f64, tt: f64| {
                    1.0 - (t * PI / tt).sin()
                }),
            ] {
                let s = Schedule::trig(variant);
                let closed = s.expected_eta_closed_form(t).unwrap();
                assert!(
                    (closed - oracle_sum(f, t)).abs() < 1e-10,
                    "{variant:?} T={t}"
                );
                assert!((closed - s.expected_eta_exact(t).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cosine_sum_vanishes_over_closed_range() {
        for &t in &[10usize, 100, 10_000] {
            let s: f64 = (0..=t).map(|k| (k as f64 * PI / t as f64).cos()).sum();
            assert!(s.abs() < 1e-9, "T={t}: {s}");
            for v in [TrigVariant::Cos1, TrigVariant::Cos2] {
                let exact = Schedule::trig(v).expected_eta_exact(t).unwrap();
                assert!((exact - 1.5).abs() <= 1.0 / t as f64);
            }
        }
    }

    #[test]
    fn linear_two_point_forms() {
        let t = 1000;
        let low = Schedule::linear_midpoint(0.3).unwrap();
        assert_eq!(low.eval(0, t).unwrap(), 0.0);
        assert!((low.eval(500, t).unwrap() - 0.3).abs() < 1e-15);
        let high = Schedule::linear_midpoint(0.8).unwrap();
        assert!((high.eval(500, t).unwrap() - 0.8).abs() < 1e-15);
        assert!(high.eval(999, t).unwrap() < 1.0);
        assert!((high.eval(0, t).unwrap() - 0.6).abs() < 1e-15);
        let pinned = Schedule::linear_midpoint_intercept(0.5, 0.2).unwrap();
        assert!((pinned.eval(500, t).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(pinned.eval(0, t).unwrap(), 0.2);
    }

    #[test]
    fn linear_validation() {
        let bad = Schedule::linear(0.002, 0.5).unwrap();
        assert!(bad.validate(100).is_ok());
        assert!(matches!(
            bad.validate(1000),
            Err(ScheduleError::NotAProbability { .. })
        ));
        assert!(bad.expected_eta_exact(1000).is_err());
        assert!(Schedule::linear(-0.001, 0.0).unwrap().validate(10).is_err());
        assert!(matches!(
            Schedule::constant(0.5).unwrap().validate(0),
            Err(ScheduleError::NoSteps)
        ));
    }

    #[test]
    fn parameter_ranges() {
        assert!(Schedule::constant(1.1).is_err());
        assert!(Schedule::piecewise(0.5, -0.1).is_err());
        assert!(Schedule::linear_midpoint(2.0).is_err());
        assert!(Schedule::linear(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn canonical_strings() {
        let cases = [
            ("constant(a_c=0.6)", Schedule::constant(0.6).unwrap()),
            (
                "piecewise(a_p=0,b_p=0.5)",
                Schedule::piecewise(0.0, 0.5).unwrap(),
            ),
            ("linear(mid=0.3)", Schedule::linear_midpoint(0.3).unwrap()),
            (
                "linear(mid=0.5,b_l=0.2)",
                Schedule::linear_midpoint_intercept(0.5, 0.2).unwrap(),
            ),
            (
                "linear(a_l=0.0001,b_l=0)",
                Schedule::linear(1e-4, 0.0).unwrap(),
            ),
            ("trig(sin1)", Schedule::trig(TrigVariant::Sin1)),
        ];
        for (text, schedule) in cases {
            assert_eq!(schedule.to_string(), text);
            assert_eq!(text.parse::<Schedule>().unwrap(), schedule);
        }
        assert_eq!(
            " piecewise( b_p = 0.5 , a_p = 0 ) "
                .parse::<Schedule>()
                .unwrap()
                .to_string(),
            "piecewise(a_p=0,b_p=0.5)"
        );
        assert_eq!(
            "sam".parse::<Schedule>().unwrap(),
            Schedule::constant(1.0).unwrap()
        );
        for bad in [
            "",
            "constant",
            "constant(a_c=x)",
            "constant(a_p=1)",
            "trig(tan)",
            "cubic(a=1)",
            "constant(a_c=0.1,a_c=0.2)",
            "constant(a_c=0.1",
        ] {
            assert!(bad.parse::<Schedule>().is_err(), "{bad}");
        }
    }

    fn any_schedule() -> impl Strategy<Value = Schedule> {
        prop_oneof![
            (0.0f64..=1.0).prop_map(|a| Schedule::constant(a).unwrap()),
            (0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(a, b)| Schedule::piecewise(a, b).unwrap()),
            (0.0f64..=1.0).prop_map(|m| Schedule::linear_midpoint(m).unwrap()),
            (0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(m, b)| {
                // keep the far end inside [0, 1]: p(T) = 2m - b
                let b = b.clamp((2.0 * m - 1.0).max(0.0), (2.0 * m).min(1.0));
                Schedule::linear_midpoint_intercept(m, b).unwrap()
            }),
            prop_oneof![
                Just(TrigVariant::Cos1),
                Just(TrigVariant::Cos2),
                Just(TrigVariant::Sin1),
                Just(TrigVariant::Sin2)
            ]
            .prop_map(Schedule::trig),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn expected_eta_in_range(s in any_schedule(), total in 1usize..5000) {
            let e = s.expected_eta_exact(total).unwrap();
            prop_assert!((1.0..=2.0).contains(&e));
            let c = s.expected_eta_closed_form(total).unwrap();
            prop_assert!((1.0..=2.0).contains(&c));
        }

        #[test]
        fn family_gaps(s in any_schedule(), total in 1usize..5000) {
            let r = s.eta_report(total).unwrap();
            let gap = (r.exact - r.closed_form).abs();
            let bound = match s {
                Schedule::Constant { .. } => 1e-12,
                Schedule::Piecewise { .. } => 2.0 / total as f64,
                Schedule::Linear(_) => 1.0 / total as f64 + 1e-12,
                Schedule::Trig(TrigVariant::Cos1 | TrigVariant::Cos2) => 1.0 / total as f64,
                Schedule::Trig(_) => 1e-10,
            };
            prop_assert!(gap <= bound, "{} T={}: gap {}", s, total, gap);
        }

        #[test]
        fn constant_is_monotone(a in 0.0f64..0.999, da in 1e-3f64..0.5, total in 1usize..2000) {
            let b = (a + da).min(1.0);
            let lo = Schedule::constant(a).unwrap().expected_eta_exact(total).unwrap();
            let hi = Schedule::constant(b).unwrap().expected_eta_exact(total).unwrap();
            prop_assert!(hi > lo);
        }

        #[test]
        fn canonical_round_trip(s in any_schedule()) {
            prop_assert_eq!(s.to_string().parse::<Schedule>().unwrap(), s);
        }

        #[test]
        fn eval_stays_in_unit_interval(s in any_schedule(), total in 1usize..3000, frac in 0.0f64..1.0) {
            let t = ((total as f64 * frac) as usize).min(total - 1);
            let p = s.eval(t, total).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
