use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::info;

use ltmor::experiment::{
    eig_report, errors_csv, run_baseline_pod, run_fom, run_ltmor, singular_values_csv, sweep, trajectory_csv,
    write_outputs, ExperimentConfig, LtmorRun,
};
use ltmor::Error;

#[derive(Parser)]
#[command(name = "ltmor", version, about = "Laplace-domain snapshot model order reduction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Full-order backward-Euler run.
    RunFom {
        #[command(flatten)]
        common: Common,
        /// Also write every nodal state to trajectory.csv.
        #[arg(long)]
        store_trajectory: bool,
    },
    /// LT-MOR bases for every M in the config and the R-sweep against the full-order run.
    RunLtmor {
        #[command(flatten)]
        common: Common,
    },
    /// Time-domain POD baseline with the same R-sweep.
    RunBaselinePod {
        #[command(flatten)]
        common: Common,
    },
    /// Extreme eigenvalues and the optimal contour parameters.
    EigReport {
        #[command(flatten)]
        common: Common,
    },
    /// LT-MOR and baseline together.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
    Other(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let config = ExperimentConfig::load(&common.config)?;
    let out = common
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((config, out))
}

fn write(dir: &Path, files: &[(&str, String)]) -> Result<(), Failure> {
    write_outputs(dir, files)
        .with_context(|| format!("writing outputs to {}", dir.display()))
        .map_err(Failure::from)
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .context("serializing report")
        .map_err(Failure::from)
}

fn ltmor_files(run: &LtmorRun) -> Result<Vec<(&'static str, String)>, Failure> {
    Ok(vec![
        ("errors.csv", errors_csv(&run.report)),
        ("singular_values.csv", singular_values_csv(&run.report)),
        ("timings.csv", run.timing.to_csv()),
        ("report.json", json(&run.report)?),
    ])
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::RunFom {
            common,
            store_trajectory,
        } => {
            let (config, out) = load(&common)?;
            let run = run_fom(&config)?;
            let final_norm = run
                .trajectory
                .states
                .last()
                .map(|u| u.norm())
                .unwrap_or(0.0);
            info!("full-order run: {} steps, final nodal norm {final_norm:.6e}", run.trajectory.n_steps());
            let mut files = vec![("timings.csv", run.timing.to_csv())];
            if store_trajectory {
                files.push(("trajectory.csv", trajectory_csv(&run.trajectory)));
            }
            write(&out, &files)?;
            println!("states: {}", run.trajectory.states.len());
        }
        Command::RunLtmor { common } => {
            let (config, out) = load(&common)?;
            let run = run_ltmor(&config)?;
            for (m, p) in &run.report.plateau {
                println!("M = {m}: best relative L2 error {p:.3e}");
            }
            write(&out, &ltmor_files(&run)?)?;
        }
        Command::RunBaselinePod { common } => {
            let (config, out) = load(&common)?;
            let run = run_baseline_pod(&config)?;
            for (m, p) in &run.report.plateau {
                println!("time snapshots = {m}: best relative L2 error {p:.3e}");
            }
            write(&out, &ltmor_files(&run)?)?;
        }
        Command::EigReport { common } => {
            let (config, out) = load(&common)?;
            let report = eig_report(&config)?;
            let text = json(&report)?;
            println!("{text}");
            write(&out, &[("eig_report.json", text)])?;
        }
        Command::Sweep { common } => {
            let (config, out) = load(&common)?;
            let run = sweep(&config)?;
            let mut files = ltmor_files(&run.ltmor)?;
            files.push(("baseline_errors.csv", errors_csv(&run.baseline.report)));
            files.push(("baseline_singular_values.csv", singular_values_csv(&run.baseline.report)));
            write(&out, &files)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
