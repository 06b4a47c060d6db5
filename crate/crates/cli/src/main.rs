//! `eicic` command-line driver.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error,
//! 3 infeasible scenario, 4 solver did not converge (outputs still written).

mod commands;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "eicic", version = output::VERSION, about = "HetNet eICIC simulator and joint optimizer")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Scenario config file (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default `out`; `report` defaults to `<input>/report`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Drop a layout and write positions and the gain tensor.
    Generate {
        /// Also write the per-RB rate table.
        #[arg(long)]
        dump_rates: bool,
    },
    /// Run the joint association / ABS / RB optimisation.
    Solve(SolveArgs),
    /// Evaluate a fixed conventional scheme.
    Baseline(BaselineArgs),
    /// Evaluate fixed schemes over a CRE bias x ABS fraction grid.
    Sweep(SweepArgs),
    /// Compute throughput metrics for a solve or baseline output directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Directory written by `generate`; the scenario is regenerated from
    /// --config/--seed when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AssociationArg {
    Heuristic,
    Relaxed,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleArg {
    Closed,
    Pf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    /// Relative utility change per cycle that counts as converged.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = AssociationArg::Heuristic)]
    pub association: AssociationArg,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Closed)]
    pub schedule: ScheduleArg,
    /// Report the relaxed upper bound (always on with --association relaxed).
    #[arg(long)]
    pub upper_bound: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineAssociationArg {
    MaxRsrp,
    Biased,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerArg {
    Pf,
    Rr,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value_t = BaselineAssociationArg::MaxRsrp)]
    pub association: BaselineAssociationArg,
    /// Pico RSRP bias for --association biased.
    #[arg(long, default_value_t = 0.0)]
    pub bias_db: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = SchedulerArg::Pf)]
    pub scheduler: SchedulerArg,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,6,12,18")]
    pub bias_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5")]
    pub beta_grid: Vec<f64>,
    #[arg(long, value_enum, default_value_t = SchedulerArg::Pf)]
    pub scheduler: SchedulerArg,
    /// Run every cell on each of these seeds (one row per seed); defaults to
    /// the config's seed. Not allowed with --scenario.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Output directory of a `solve` or `baseline` run.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] eicic::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
    #[error("solver did not converge within {0} iterations; best iterate written")]
    NotConverged(usize),
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Core(eicic::Error::Config(_)) => 2,
            CliError::Core(eicic::Error::Infeasible(_)) => 3,
            CliError::NotConverged(_) => 4,
            _ => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
