use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sssam::harness::{
    eta_table, eta_table_csv, read_schedule_list, replot_from_report, run_experiment,
    sharpness_from_report, ExperimentConfig, HarnessError,
};

#[derive(Parser)]
#[command(
    name = "sssam",
    version,
    about = "Stochastic scheduled SAM experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config and write reports.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds (overrides the config).
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Expected propagation cost of each schedule in a list file.
    EtaTable {
        schedules: PathBuf,
        #[arg(long)]
        steps: usize,
        /// Also write `eta-table.csv` into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the (t, p_t, x_t) plot CSV of a per-seed report.
    PlotSchedule {
        report: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sharpness diagnostics and loss slice at a run's final parameters.
    Sharpness {
        report: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(command: Command) -> Result<i32, HarnessError> {
    match command {
        Command::Run { config, out, seeds } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seeds) = seeds {
                cfg.experiment.seeds = seeds;
            }
            let out = out
                .or_else(|| cfg.experiment.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let report = run_experiment(&cfg, &out)?;
            let eta = report.empirical_eta.map(|s| s.mean);
            println!(
                "{}: {} seeds, expected eta {}, mean empirical eta {}, failed {:?}",
                report.name,
                report.runs.len(),
                report.expected_eta,
                eta.map_or("n/a".to_string(), |e| e.to_string()),
                report.failed_seeds
            );
            Ok(report.exit_code())
        }
        Command::EtaTable {
            schedules,
            steps,
            out,
        } => {
            let text = fs::read_to_string(&schedules).map_err(|source| HarnessError::Io {
                path: schedules.display().to_string(),
                source,
            })?;
            let rows = eta_table(&read_schedule_list(&text)?, steps)?;
            let csv = eta_table_csv(&rows);
            print!("{csv}");
            if let Some(dir) = out {
                let path = dir.join("eta-table.csv");
                fs::create_dir_all(&dir)
                    .and_then(|_| fs::write(&path, &csv))
                    .map_err(|source| HarnessError::Io {
                        path: path.display().to_string(),
                        source,
                    })?;
            }
            Ok(0)
        }
        Command::PlotSchedule { report, out } => {
            let path = replot_from_report(&report, out.as_deref())?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Sharpness { report, rho, out } => {
            let result = sharpness_from_report(&report, rho, out.as_deref())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&result).expect("reports always serialize")
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
