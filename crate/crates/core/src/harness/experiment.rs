use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    eta_table_with, evaluate, io_error, published_registry, ExperimentConfig, HarnessError, Summary,
};
use crate::numeric::{format_float, Params};
use crate::objective::Batch;
use crate::optimizer::{ss_sam_run, OptimizerError, StepRecord};
use crate::scheduler::Schedule;
use crate::sharpness::{
    hessian_top_eigen, loss_slice, sharpness_report, slice_to_csv, SharpnessOptions,
    SharpnessReport,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const AGGREGATE_FILE: &str = "aggregate.json";

const TRACE_HEADER: &str = "t,x_t,eta_t,loss,grad_norm";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub step: usize,
    pub reason: String,
}

/// Per-seed result file. File references are relative to the file's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub schema: u32,
    pub seed: u64,
    pub completed: bool,
    pub failure: Option<Failure>,
    pub schedule: String,
    pub total_steps: usize,
    pub steps_completed: usize,
    pub empirical_eta: Option<f64>,
    pub expected_eta: f64,
    pub sam_steps: u64,
    pub propagations: u64,
    pub final_loss: Option<f64>,
    pub eval_error: Option<f64>,
    pub final_theta: Option<Vec<f64>>,
    pub trace_file: String,
    pub plot_file: String,
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub completed: bool,
    pub failure: Option<Failure>,
    pub empirical_eta: Option<f64>,
    pub final_loss: Option<f64>,
    pub eval_error: Option<f64>,
    pub report_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema: u32,
    pub name: String,
    pub schedule: String,
    pub total_steps: usize,
    pub expected_eta: f64,
    pub expected_eta_closed_form: f64,
    /// Published value for this schedule, when registered.
    pub published_eta: Option<f64>,
    pub erratum: bool,
    /// Statistics over completed seeds.
    pub empirical_eta: Option<Summary>,
    pub final_loss: Option<Summary>,
    pub eval_error: Option<Summary>,
    pub runs: Vec<SeedOutcome>,
    pub failed_seeds: Vec<u64>,
}

impl AggregateReport {
    /// 0 if every seed completed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failed_seeds.is_empty() {
            0
        } else {
            2
        }
    }
}

fn seed_files(seed: u64) -> (String, String, String) {
    (
        format!("seed-{seed}.json"),
        format!("seed-{seed}-trace.csv"),
        format!("seed-{seed}-schedule.csv"),
    )
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(io_error(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports always serialize");
    text.push('\n');
    write(path, &text)
}

pub fn trace_to_csv(trace: &[StepRecord]) -> String {
    let mut out = String::with_capacity(32 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.t,
            r.x_t,
            r.eta_t,
            format_float(r.loss),
            format_float(r.grad_norm)
        ));
    }
    out
}

/// Reads [`trace_to_csv`] output. The CSV has no perturbation column, so
/// `eps_norm` is 0 in every returned record.
pub fn trace_from_csv(text: &str, path: &str) -> Result<Vec<StepRecord>, HarnessError> {
    let bad = |reason: String| HarnessError::Format {
        what: "trace",
        path: path.to_string(),
        reason,
    };
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(bad(format!("expected header `{TRACE_HEADER}`")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(format!("row {}: expected 5 fields", i + 1)));
            }
            let field = |k: usize| bad(format!("row {}: bad field `{}`", i + 1, f[k]));
            Ok(StepRecord {
                t: f[0].parse().map_err(|_| field(0))?,
                x_t: f[1].parse().map_err(|_| field(1))?,
                eta_t: f[2].parse().map_err(|_| field(2))?,
                loss: f[3].parse().map_err(|_| field(3))?,
                grad_norm: f[4].parse().map_err(|_| field(4))?,
                eps_norm: 0.0,
            })
        })
        .collect()
}

/// CSV `t,p_t,x_t`: the schedule's probability and the trial outcome at
/// every recorded step.
pub fn schedule_plot_csv(
    schedule: &Schedule,
    total: usize,
    trace: &[StepRecord],
) -> Result<String, HarnessError> {
    if trace.is_empty() {
        return Err(HarnessError::Config("cannot plot an empty trace".into()));
    }
    let mut out = String::from("t,p_t,x_t\n");
    for r in trace {
        let p = schedule.eval(r.t, total)?;
        out.push_str(&format!("{},{},{}\n", r.t, format_float(p), r.x_t));
    }
    Ok(out)
}

pub fn emit_schedule_plot(
    schedule: &Schedule,
    total: usize,
    trace: &[StepRecord],
    path: &Path,
) -> Result<(), HarnessError> {
    write(path, &schedule_plot_csv(schedule, total, trace)?)
}

/// Runs every seed of `config`, writing into `out_dir`:
/// `seed-<s>.json`, `seed-<s>-trace.csv`, `seed-<s>-schedule.csv` per seed
/// and `aggregate.json`. Seeds run in parallel; outputs do not depend on
/// scheduling order.
///
/// A diverging seed is recorded as failed and the others continue; see
/// [`AggregateReport::exit_code`].
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<AggregateReport, HarnessError> {
    config.validate()?;
    let built = config.build_objective()?;
    let schedule = config.schedule()?;
    let total = config.total_steps()?;
    fs::create_dir_all(out_dir).map_err(io_error(out_dir))?;

    let expected = schedule.eta_report(total)?;
    let runs: Vec<SeedOutcome> = config
        .experiment
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, &built, &schedule, seed, out_dir))
        .collect::<Result<_, _>>()?;

    let completed: Vec<&SeedOutcome> = runs.iter().filter(|r| r.completed).collect();
    let collect = |f: fn(&SeedOutcome) -> Option<f64>| {
        let values: Vec<f64> = completed.iter().filter_map(|r| f(r)).collect();
        Summary::of(&values)
    };
    let row = eta_table_with(
        std::slice::from_ref(&schedule),
        total,
        &published_registry(),
    )?
    .remove(0);

    let report = AggregateReport {
        schema: SCHEMA_VERSION,
        name: config.experiment.name.clone(),
        schedule: schedule.to_string(),
        total_steps: total,
        expected_eta: expected.exact,
        expected_eta_closed_form: expected.closed_form,
        published_eta: row.published,
        erratum: row.erratum,
        empirical_eta: collect(|r| r.empirical_eta),
        final_loss: collect(|r| r.final_loss),
        eval_error: collect(|r| r.eval_error),
        failed_seeds: runs
            .iter()
            .filter(|r| !r.completed)
            .map(|r| r.seed)
            .collect(),
        runs,
    };
    write_json(&out_dir.join(AGGREGATE_FILE), &report)?;
    Ok(report)
}

fn run_seed(
    config: &ExperimentConfig,
    built: &super::BuiltObjective,
    schedule: &Schedule,
    seed: u64,
    out_dir: &Path,
) -> Result<SeedOutcome, HarnessError> {
    let opt = config.optimizer_config(seed)?;
    let total = opt.total_steps;
    let obj = built.objective.as_ref();
    let (report_file, trace_file, plot_file) = seed_files(seed);

    let (trace, final_theta, failure) = match ss_sam_run(obj, &opt, schedule) {
        Ok(run) => (run.trace, Some(run.final_theta), None),
        Err(OptimizerError::Diverged(d)) => (
            d.trace,
            None,
            Some(Failure {
                step: d.step,
                reason: d.reason,
            }),
        ),
        Err(e) => return Err(e.into()),
    };

    let final_loss = match &final_theta {
        Some(theta) => Some(obj.value(theta, &Batch::Full)?),
        None => None,
    };
    let eval_error = match (&final_theta, &built.classifier) {
        (Some(theta), Some((mlp, test))) => Some(evaluate(mlp, theta, test)?),
        _ => None,
    };
    let propagations: u64 = trace.iter().map(|r| u64::from(r.eta_t)).sum();
    let sam_steps: u64 = trace.iter().map(|r| u64::from(r.x_t)).sum();
    let empirical_eta = final_theta
        .as_ref()
        .map(|_| propagations as f64 / total as f64);

    write(&out_dir.join(&trace_file), &trace_to_csv(&trace))?;
    if !trace.is_empty() {
        emit_schedule_plot(schedule, total, &trace, &out_dir.join(&plot_file))?;
    }

    let mut experiment = config.clone();
    experiment.experiment.seeds = vec![seed];
    experiment.experiment.output_dir = None;
    let seed_report = SeedReport {
        schema: SCHEMA_VERSION,
        seed,
        completed: failure.is_none(),
        failure: failure.clone(),
        schedule: schedule.to_string(),
        total_steps: total,
        steps_completed: trace.len(),
        empirical_eta,
        expected_eta: schedule.expected_eta_exact(total)?,
        sam_steps,
        propagations,
        final_loss,
        eval_error,
        final_theta: final_theta.as_ref().map(Params::to_f64_vec),
        trace_file,
        plot_file,
        experiment,
    };
    write_json(&out_dir.join(&report_file), &seed_report)?;

    Ok(SeedOutcome {
        seed,
        completed: failure.is_none(),
        failure,
        empirical_eta,
        final_loss,
        eval_error,
        report_file,
    })
}

fn read_seed_report(path: &Path) -> Result<SeedReport, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Format {
        what: "seed report",
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Regenerates the schedule plot CSV of a per-seed report from its trace.
pub fn replot_from_report(
    report_path: &Path,
    out_dir: Option<&Path>,
) -> Result<PathBuf, HarnessError> {
    let report = read_seed_report(report_path)?;
    let base = report_path.parent().unwrap_or(Path::new("."));
    let trace_path = base.join(&report.trace_file);
    let text = fs::read_to_string(&trace_path).map_err(io_error(&trace_path))?;
    let trace = trace_from_csv(&text, &trace_path.display().to_string())?;
    let schedule: Schedule = report.schedule.parse()?;
    let dir = out_dir.unwrap_or(base);
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let path = dir.join(&report.plot_file);
    emit_schedule_plot(&schedule, report.total_steps, &trace, &path)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessOutput {
    pub seed: u64,
    pub report: SharpnessReport,
    pub slice_file: String,
}

/// Sharpness of a completed run's final parameters on the full training
/// objective, plus a loss slice along the top Hessian eigenvector
/// (41 points over `[-4 rho, 4 rho]`). Writes `seed-<s>-sharpness.json` and
/// `seed-<s>-slice.csv` into `out_dir` (default: next to the report).
pub fn sharpness_from_report(
    report_path: &Path,
    rho: f64,
    out_dir: Option<&Path>,
) -> Result<SharpnessOutput, HarnessError> {
    let report = read_seed_report(report_path)?;
    let theta = report.final_theta.as_ref().ok_or_else(|| {
        HarnessError::Config(format!(
            "seed {} did not complete; no final parameters",
            report.seed
        ))
    })?;
    let theta = Params::new(theta.clone()).map_err(crate::objective::ObjectiveError::from)?;
    let built = report.experiment.build_objective()?;
    let obj = built.objective.as_ref();
    let options = SharpnessOptions::default();
    let sharp = sharpness_report(obj, &theta, rho, &Batch::Full, &options)?;
    let top = hessian_top_eigen(obj, &theta, &Batch::Full, &options.eigen)?;
    let slice = loss_slice(obj, &theta, &top.vector, 4.0 * rho, 41, &Batch::Full)?;

    let dir = out_dir.unwrap_or(report_path.parent().unwrap_or(Path::new(".")));
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let slice_file = format!("seed-{}-slice.csv", report.seed);
    write(&dir.join(&slice_file), &slice_to_csv(&slice))?;
    let output = SharpnessOutput {
        seed: report.seed,
        report: sharp,
        slice_file,
    };
    write_json(
        &dir.join(format!("seed-{}-sharpness.json", report.seed)),
        &output,
    )?;
    Ok(output)
}
