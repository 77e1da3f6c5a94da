//! Acceptance criteria, one report line per criterion.
//!
//! Runs as a plain binary so the PASS/FAIL lines are always printed; the
//! process exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use sssam::harness::{eta_table, run_experiment, ExperimentConfig, AGGREGATE_FILE};
use sssam::numeric::{central_diff_grad, Params, RngStream, StreamId};
use sssam::objective::{
    make_dataset, Activation, Batch, DatasetSpec, EpochSampler, Generator, Mlp, MlpObjective,
    Objective, Quadratic, TwoWell,
};
use sssam::optimizer::{
    compute_epsilon, ss_sam_run, ss_sam_run_from, ss_sam_run_observed, LrSchedule, OptimizerConfig,
};
use sssam::scheduler::{Schedule, TrigVariant};
use sssam::sharpness::{hessian_top_eigen, EigenOptions};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    check(
        elapsed < budget,
        format!("took {elapsed:.2?}, budget {budget:.0?}"),
    )
}

fn grid() -> impl Iterator<Item = f64> {
    (1..=9).map(|i| i as f64 / 10.0)
}

/// Published-cost grids at `T = 10^4`: every printed value is matched within
/// 0.01 unless the row is a known misprint, in which case it is flagged and
/// the analytic value is reported.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let total = 10_000;
    let mut schedules = vec![
        Schedule::constant(0.0).unwrap(),
        Schedule::constant(1.0).unwrap(),
    ];
    for v in grid() {
        schedules.push(Schedule::constant(v).unwrap());
        schedules.push(Schedule::piecewise(0.0, v).unwrap());
        schedules.push(Schedule::piecewise(1.0, v).unwrap());
        schedules.push(Schedule::linear_midpoint(v).unwrap());
    }
    let trig = [
        TrigVariant::Cos1,
        TrigVariant::Cos2,
        TrigVariant::Sin1,
        TrigVariant::Sin2,
    ];
    schedules.extend(trig.into_iter().map(Schedule::trig));
    let rows = eta_table(&schedules, total).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    // Printed values that disagree with their own family's closed form.
    let piecewise_oracle = |a: f64, b: f64| 2.0 + 2.0 * a * b - b - a;
    check(
        (piecewise_oracle(1.0, 0.6) - 1.6).abs() < 1e-12,
        "piecewise oracle",
    )?;
    let known_misprints = [
        "piecewise(a_p=1,b_p=0.6)",
        "linear(mid=0.6)",
        "trig(sin1)",
        "trig(sin2)",
    ];
    let cot = 1.0 / (PI / (2.0 * total as f64)).tan();
    let tf = total as f64;

    let mut flagged = Vec::new();
    for row in &rows {
        let printed = row
            .published
            .ok_or_else(|| format!("{} has no published value", row.schedule))?;
        if row.erratum {
            flagged.push(row.schedule.clone());
        } else {
            check(
                (row.exact - printed).abs() <= 0.01,
                format!("{}: {} vs printed {printed}", row.schedule, row.exact),
            )?;
        }
    }
    check(
        flagged == known_misprints,
        format!("flagged rows {flagged:?}, expected {known_misprints:?}"),
    )?;
    let value = |name: &str| rows.iter().find(|r| r.schedule == name).unwrap().exact;
    check(
        (value("linear(mid=0.6)") - 1.6).abs() <= 0.01,
        "linear(mid=0.6) analytic",
    )?;
    check(
        (value("piecewise(a_p=1,b_p=0.6)") - 1.6).abs() <= 0.01,
        "piecewise(a_p=1,b_p=0.6) analytic",
    )?;
    check(
        (value("trig(sin1)") - (1.0 + cot / tf)).abs() < 1e-12,
        "sin1 analytic",
    )?;
    check(
        (value("trig(sin2)") - (2.0 - cot / tf)).abs() < 1e-12,
        "sin2 analytic",
    )?;
    within_budget(elapsed, Duration::from_secs(1))?;
    Ok(format!(
        "{} rows, flagged {flagged:?}, {elapsed:.2?}",
        rows.len()
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    for total in [10usize, 100, 10_000] {
        let tf = total as f64;
        let sum: f64 = (0..=total).map(|t| (t as f64 * PI / tf).cos()).sum();
        check(sum.abs() < 1e-9, format!("T={total}: cosine sum {sum}"))?;
        for v in [TrigVariant::Cos1, TrigVariant::Cos2] {
            let eta = Schedule::trig(v)
                .expected_eta_exact(total)
                .map_err(|e| e.to_string())?;
            check(
                (eta - 1.5).abs() <= 1.0 / tf,
                format!("T={total} {v:?}: {eta}"),
            )?;
        }
    }
    let elapsed = start.elapsed();
    within_budget(elapsed, Duration::from_secs(1))?;
    Ok(format!("T in {{10, 100, 10^4}}, {elapsed:.2?}"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let obj = Quadratic::<f64>::isotropic(2, 1.0).map_err(|e| e.to_string())?;
    let schedule = Schedule::constant(0.6).unwrap();
    let mut etas = Vec::new();
    for seed in 1..=5 {
        let cfg = OptimizerConfig::new(0.05, LrSchedule::Constant { lr: 0.1 }, 100_000, 1, seed);
        let report = ss_sam_run(&obj, &cfg, &schedule).map_err(|e| e.to_string())?;
        check(
            (report.empirical_eta - 1.6).abs() <= 0.01,
            format!("seed {seed}: {}", report.empirical_eta),
        )?;
        etas.push(report.empirical_eta);
    }
    let elapsed = start.elapsed();
    within_budget(elapsed, Duration::from_secs(10))?;
    Ok(format!("etas {etas:?}, {elapsed:.2?}"))
}

fn moons_mlp(size: usize, noise: f64, seed: u64, layers: Vec<usize>) -> MlpObjective<f64> {
    let data = make_dataset(&DatasetSpec {
        generator: Generator::TwoMoons,
        size,
        num_classes: 2,
        noise,
        seed,
    })
    .unwrap();
    MlpObjective::new(Mlp::new(layers, Activation::Tanh).unwrap(), data).unwrap()
}

/// Pure SGD or pure SAM written out by hand on the same init and batch streams.
fn reference_trajectory(
    obj: &MlpObjective<f64>,
    cfg: &OptimizerConfig,
    sam: bool,
) -> Vec<Vec<f64>> {
    let mut theta = obj
        .init_params(&mut RngStream::new(cfg.seed, StreamId::Init))
        .into_vec();
    let mut batches = RngStream::new(cfg.seed, StreamId::Batch);
    let mut sampler = EpochSampler::new(obj.dataset().len(), cfg.batch_size).unwrap();
    let grad = |theta: &[f64], batch: &Batch| {
        obj.value_and_grad(&Params::new(theta.to_vec()).unwrap(), batch)
            .unwrap()
            .1
    };
    let mut out = Vec::with_capacity(cfg.total_steps);
    for t in 0..cfg.total_steps {
        let batch = sampler.next_batch(&mut batches);
        let lr = cfg.lr_schedule.lr_at(t, cfg.total_steps).unwrap();
        let g1 = grad(&theta, &batch);
        let g = if sam {
            let scale = cfg.rho / g1.norm();
            let shifted: Vec<f64> = theta
                .iter()
                .zip(g1.iter())
                .map(|(a, g)| a + scale * g)
                .collect();
            grad(&shifted, &batch)
        } else {
            g1
        };
        theta = theta
            .iter()
            .zip(g.iter())
            .map(|(&a, &g)| -lr * g + a)
            .collect();
        out.push(theta.clone());
    }
    out
}

fn criterion_4() -> Outcome {
    let obj = moons_mlp(200, 0.1, 11, vec![2, 8, 8, 2]);
    let cfg = OptimizerConfig::new(0.05, LrSchedule::Cosine { lr_base: 0.2 }, 1000, 16, 21);
    for (a_c, sam) in [(0.0, false), (1.0, true)] {
        let expected = reference_trajectory(&obj, &cfg, sam);
        let theta0 = obj.init_params(&mut RngStream::new(cfg.seed, StreamId::Init));
        let mut seen = Vec::with_capacity(cfg.total_steps);
        let schedule = Schedule::constant(a_c).unwrap();
        ss_sam_run_observed(&obj, &cfg, &schedule, theta0, |_, theta| {
            seen.push(theta.as_slice().to_vec())
        })
        .map_err(|e| e.to_string())?;
        check(seen.len() == expected.len(), "trajectory length")?;
        let same = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
        if let Some(t) = (0..expected.len()).find(|&t| !same(&seen[t], &expected[t])) {
            return Err(format!(
                "constant({a_c}) diverges from reference at step {t}"
            ));
        }
    }
    Ok("1000 steps bit-identical for constant(0) and constant(1)".into())
}

fn criterion_5() -> Outcome {
    let mut rng = RngStream::new(5, StreamId::Landscape);
    let mut worst_norm = 0.0f64;
    let mut worst_cos = 0.0f64;
    for _ in 0..1000 {
        let dim = 1 + (rng.uniform() * 64.0) as usize;
        let scale = 10f64.powf(rng.uniform_in(-6.0, 6.0));
        let rho = 10f64.powf(rng.uniform_in(-3.0, 0.0));
        let g: Vec<f64> = (0..dim).map(|_| scale * rng.standard_normal()).collect();
        let eps = compute_epsilon(&Params::new(g.clone()).unwrap(), rho, 1e-12)
            .map_err(|e| e.to_string())?;
        let e = eps.as_slice();
        let norm_e = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        let norm_g = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dot: f64 = e.iter().zip(&g).map(|(a, b)| a * b).sum();
        worst_norm = worst_norm.max((norm_e - rho).abs() / rho);
        worst_cos = worst_cos.max((dot / (norm_e * norm_g) - 1.0).abs());
    }
    check(worst_norm < 1e-12, format!("norm error {worst_norm:e}"))?;
    check(worst_cos < 1e-12, format!("cosine error {worst_cos:e}"))?;
    let zero = compute_epsilon(&Params::<f64>::zeros(7), 0.1, 1e-12).map_err(|e| e.to_string())?;
    check(zero.is_zero(), "zero gradient gives non-zero perturbation")?;
    Ok(format!(
        "max norm error {worst_norm:e}, max cosine error {worst_cos:e}"
    ))
}

fn criterion_6() -> Outcome {
    let obj = moons_mlp(64, 0.2, 6, vec![2, 16, 16, 2]);
    let mut rng = RngStream::new(6, StreamId::Init);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let theta = obj.init_params(&mut rng);
        let (_, g) = obj
            .value_and_grad(&theta, &Batch::Full)
            .map_err(|e| e.to_string())?;
        let fd = central_diff_grad(
            |p: &Params<f64>| obj.value(p, &Batch::Full).unwrap(),
            &theta,
            1e-5,
        )
        .map_err(|e| e.to_string())?;
        let diff = g.sub(&fd).unwrap().norm();
        worst = worst.max(diff / g.norm().max(fd.norm()));
    }
    check(worst < 1e-5, format!("max relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:e} over 20 points"))
}

/// Landscape, inits, step size and step count shared by the flat-minimum runs.
struct WellSetup {
    well: TwoWell<f64>,
    inits: Vec<Params<f64>>,
}

fn well_endpoint(
    setup: &WellSetup,
    theta0: &Params<f64>,
    schedule: &Schedule,
    rho: f64,
) -> Params<f64> {
    let cfg = OptimizerConfig::new(rho, LrSchedule::Constant { lr: 0.02 }, 2000, 1, 0);
    ss_sam_run_from(&setup.well, &cfg, schedule, theta0.clone())
        .expect("two-well run stays finite")
        .final_theta
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let well = TwoWell::<f64>::new(-2.0, 2.0, 1.0, 25.0, 1).map_err(|e| e.to_string())?;
    let inits: Vec<Params<f64>> = (0..100)
        .map(|s| well.init_params(&mut RngStream::new(s, StreamId::Init)))
        .collect();
    let flat_starts = inits.iter().filter(|p| well.in_flat_basin(p)).count();
    check(
        (20..=80).contains(&flat_starts),
        format!("inits do not straddle the basins: {flat_starts} flat"),
    )?;
    let setup = WellSetup { well, inits };

    let eigen = |theta: &Params<f64>| {
        hessian_top_eigen(&setup.well, theta, &Batch::Full, &EigenOptions::default())
            .expect("eigen estimate")
            .value
    };
    let endpoints = |schedule: &Schedule, rho: f64| -> Vec<Params<f64>> {
        setup
            .inits
            .iter()
            .map(|t0| well_endpoint(&setup, t0, schedule, rho))
            .collect()
    };
    let flat_rate = |ends: &[Params<f64>]| {
        ends.iter().filter(|p| setup.well.in_flat_basin(p)).count() as f64 / ends.len() as f64
    };
    let mean_eigen =
        |ends: &[Params<f64>]| ends.iter().map(&eigen).sum::<f64>() / ends.len() as f64;

    let sgd_ends = endpoints(&Schedule::constant(0.0).unwrap(), 0.05);
    let sgd_rate = flat_rate(&sgd_ends);
    let sgd_eigen = mean_eigen(&sgd_ends);

    let sam = Schedule::constant(1.0).unwrap();
    let mut sweep = Vec::new();
    let mut found = None;
    for rho in [0.05, 0.1, 0.2, 0.5, 1.0, 1.5] {
        let ends = endpoints(&sam, rho);
        let rate = flat_rate(&ends);
        sweep.push(format!("rho={rho}: {:.0}%", rate * 100.0));
        if found.is_none() && rate - sgd_rate >= 0.20 {
            found = Some((rho, rate, mean_eigen(&ends)));
        }
    }
    let elapsed = start.elapsed();
    let (rho, rate, sam_eigen) = found.ok_or_else(|| {
        format!(
            "no rho beats SGD ({:.0}%) by 20pp: {sweep:?}",
            sgd_rate * 100.0
        )
    })?;
    check(
        sam_eigen < sgd_eigen,
        format!("SAM mean top eigenvalue {sam_eigen} not below SGD {sgd_eigen}"),
    )?;
    within_budget(elapsed, Duration::from_secs(30))?;
    Ok(format!(
        "SGD flat {:.0}% (eig {sgd_eigen:.2}); SAM rho={rho} flat {:.0}% (eig {sam_eigen:.2}); {elapsed:.2?}",
        sgd_rate * 100.0,
        rate * 100.0
    ))
}

const MOONS_CONFIG: &str = r#"
[experiment]
name = "moons"
seeds = [1, 2, 3, 4, 5]

[objective]
kind = "mlp"
layers = [2, 16, 16, 2]
activation = "tanh"
train = { generator = "two_moons", size = 400, num_classes = 2, noise = 0.2, seed = 100 }
test = { generator = "two_moons", size = 400, num_classes = 2, noise = 0.2, seed = 200 }

[optimizer]
rho = 0.05
lr = 0.1
lr_schedule = "cosine"
total_steps = 2000
batch_size = 32

[schedule]
spec = "constant(a_c=0.5)"
"#;

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::from_toml(MOONS_CONFIG).map_err(|e| e.to_string())?;
    let ss = run_experiment(&cfg, &dir.path().join("ss")).map_err(|e| e.to_string())?;
    cfg.schedule.spec = "sgd".into();
    let sgd = run_experiment(&cfg, &dir.path().join("sgd")).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(
        ss.failed_seeds.is_empty() && sgd.failed_seeds.is_empty(),
        "a seed failed",
    )?;
    let ss_err = ss.eval_error.ok_or("no eval error")?.mean;
    let sgd_err = sgd.eval_error.ok_or("no eval error")?.mean;
    let eta = ss.empirical_eta.ok_or("no empirical eta")?.mean;
    check(
        ss_err <= sgd_err,
        format!("SS-SAM test error {ss_err} above SGD {sgd_err}"),
    )?;
    check((eta - 1.5).abs() <= 0.02, format!("mean eta {eta}"))?;
    within_budget(elapsed, Duration::from_secs(120))?;
    Ok(format!(
        "test error SS-SAM {ss_err:.4} vs SGD {sgd_err:.4}, mean eta {eta:.4}, {elapsed:.2?}"
    ))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::from_toml(MOONS_CONFIG).map_err(|e| e.to_string())?;
    cfg.optimizer.total_steps = Some(300);
    cfg.schedule.spec = "trig(cos1)".into();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        run_experiment(&cfg, &out).map_err(|e| e.to_string())?;
        outputs.push(std::fs::read(out.join(AGGREGATE_FILE)).map_err(|e| e.to_string())?);
    }
    check(
        outputs[0] == outputs[1],
        "aggregate JSON differs between runs",
    )?;
    Ok(format!("{} identical bytes", outputs[0].len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("expected-cost table reproduction", criterion_1),
        ("cosine summation identity", criterion_2),
        ("Monte Carlo cost concentration", criterion_3),
        ("degenerate schedules equal SGD and SAM", criterion_4),
        ("SAM perturbation properties", criterion_5),
        ("MLP gradient correctness", criterion_6),
        ("flat-minimum selection", criterion_7),
        ("directional generalization trend", criterion_8),
        ("end-to-end determinism", criterion_9),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| Err(format!("panicked: {p:?}")));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
