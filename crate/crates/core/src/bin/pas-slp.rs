use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use pas_slp::bench::{emit_csv, run_experiment, summarize, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "pas-slp",
    version,
    about = "Pinching-antenna symbol-level precoding experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its records as CSV.
    Run {
        /// JSON experiment config. Defaults apply to every missing field.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        experiment: ExperimentArg,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    PowerVsSinr,
    PowerVsNumpas,
    Convergence,
}

impl From<ExperimentArg> for Experiment {
    fn from(a: ExperimentArg) -> Self {
        match a {
            ExperimentArg::PowerVsSinr => Experiment::PowerVsSinr,
            ExperimentArg::PowerVsNumpas => Experiment::PowerVsNumpas,
            ExperimentArg::Convergence => Experiment::Convergence,
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let Command::Run {
        config,
        experiment,
        trials,
        seed,
        out,
    } = cli.command;
    let mut cfg = match &config {
        Some(path) => ExperimentConfig::from_json_file(path)
            .with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    cfg.validate()?;

    let experiment = Experiment::from(experiment);
    let records = run_experiment(&cfg, experiment)?;
    emit_csv(&records, &out)?;

    let summary = summarize(&records);
    for row in &summary {
        eprintln!(
            "{:<13} gamma {:>5.1} dB  L {:>2}  mean {:>10.4} dBm  feasible {}/{}",
            row.scheme, row.gamma_db, row.num_pas, row.mean_power_dbm, row.feasible, row.trials
        );
    }
    if summary.iter().all(|r| r.feasible == 0) {
        bail!("every trial was infeasible");
    }
    eprintln!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
