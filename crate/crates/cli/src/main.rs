use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prisens::Estimator;

mod commands;
mod config;
mod oracle_suite;

use config::Format;

/// Prior sensitivity of Bayesian posteriors from base-posterior draws.
#[derive(Debug, Parser)]
#[command(name = "prisens", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the base posterior and write draws.csv.
    Fit(FitArgs),
    /// Sensitivity to each configured alternative prior, as JSON.
    Sensitivity(SensitivityArgs),
    /// Sensitivity surfaces over a hyperparameter grid.
    Sweep(SweepArgs),
    /// Run the ground-truth checks and print a pass/fail table.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimatorArgs {
    /// Draws CSV written by `fit` or an external sampler.
    #[arg(long)]
    draws: PathBuf,
    /// t1 (plain), t2 (joint latent) or t3 (latent marginal).
    #[arg(long, value_delimiter = ',')]
    estimator: Vec<Estimator>,
    /// Neighbourhoods of the k nearest draws for t3.
    #[arg(long, conflicts_with = "epsilon")]
    knn: Option<usize>,
    /// Neighbourhoods within this standardized distance for t3.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Bootstrap resamples for standard errors; 0 disables.
    #[arg(long)]
    bootstrap: Option<usize>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SensitivityArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    est: EstimatorArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    est: EstimatorArgs,
    #[arg(long, value_delimiter = ',')]
    format: Vec<Format>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Directory holding the fixture CSVs to verify; the bundled copies by
    /// default.
    #[arg(long)]
    fixture_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Numeric(String),
    OracleFailed(usize),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::OracleFailed(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical error: {m}"),
            CliError::OracleFailed(n) => write!(f, "{n} oracle check(s) failed"),
        }
    }
}

impl From<prisens::Error> for CliError {
    fn from(e: prisens::Error) -> Self {
        match e {
            prisens::Error::InvalidArgument(_) | prisens::Error::Draws(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("PRISENS_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("PRISENS_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Fit(a) => commands::fit(&a.common),
        Command::Sensitivity(a) => commands::sensitivity(&a.common, &a.est),
        Command::Sweep(a) => commands::sweep(&a.common, &a.est, &a.format),
        Command::Oracle(a) => oracle_suite::run(a.fixture_dir.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("prisens: {e}");
            ExitCode::from(e.code())
        }
    }
}
