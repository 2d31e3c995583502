//! Command-line front end for the MPS/MROS experiments.
//!
//! Subcommands: `solve` (truncated-chain stationary relation), `simulate`
//! (one engine, sample dump), `compare` (both engines, scaled-tail
//! comparison), `couple` (pathwise construction with conditional-law
//! checks). Exit codes: 0 pass, 1 check failed, 2 usage or configuration
//! error, 3 internal error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::Outcome;
use config::PolicyChoice;

#[derive(Debug)]
pub enum CliError {
    /// Bad usage or configuration; exit code 2.
    Config(anyhow::Error),
    /// Failure while producing results; exit code 3.
    Internal(anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &anyhow::Error {
        match self {
            CliError::Config(e) | CliError::Internal(e) => e,
        }
    }
}

impl From<mps_mros::ctmc::CtmcError> for CliError {
    fn from(error: mps_mros::ctmc::CtmcError) -> Self {
        use mps_mros::ctmc::CtmcError::*;
        match error {
            Model(_) | TruncationTooSmall | StateSpaceTooLarge { .. } | BadTolerance { .. } => {
                CliError::Config(anyhow::anyhow!(error))
            }
            NonConvergence { .. } | ReducibleChain { .. } => {
                CliError::Internal(anyhow::anyhow!(error))
            }
        }
    }
}

impl From<mps_mros::engines::EngineError> for CliError {
    fn from(error: mps_mros::engines::EngineError) -> Self {
        // Run-length and state arities are validated up front; anything
        // surfacing here is a configuration the validator missed.
        CliError::Config(anyhow::anyhow!(error))
    }
}

impl From<mps_mros::coupling::CouplingError> for CliError {
    fn from(error: mps_mros::coupling::CouplingError) -> Self {
        use mps_mros::coupling::CouplingError::*;
        match error {
            TooFewReplications { .. } | Engine(_) | Stats(_) => {
                CliError::Config(anyhow::anyhow!(error))
            }
            EpochCapExceeded { .. } => CliError::Internal(anyhow::anyhow!(error)),
        }
    }
}

impl From<mps_mros::stats::StatsError> for CliError {
    fn from(error: mps_mros::stats::StatsError) -> Self {
        CliError::Config(anyhow::anyhow!(error))
    }
}

#[derive(Parser)]
#[command(
    name = "mps-mros",
    version,
    about = "Multiclass processor-sharing vs. random-order-service experiments",
    long_about = "Exact chain solving, discrete-event simulation and coupled runs for \
                  multiclass processor-sharing (MPS) and random-order-service (MROS) \
                  queues, including the scaled tail identity ρ·P(S > t) = P(W > t)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve both truncated chains and check π̂(1,n̄) = ρ·π(n̄)
    Solve(RunArgs),
    /// Run one engine (mps or mros) and write per-customer samples
    Simulate(RunArgs),
    /// Run both engines and compare ρ·P(S > t) against P(W > t) per class
    Compare(RunArgs),
    /// Coupled runs: pathwise equality plus conditional-law KS checks
    Couple(RunArgs),
}

/// Flags shared by all subcommands; each overrides the matching config
/// file value (flags > file > defaults).
#[derive(Args, Debug)]
pub struct RunArgs {
    /// Experiment configuration (JSON with "system" and "run" sections)
    #[arg(long)]
    config: PathBuf,
    /// Master seed; required here or in the file (no wall-clock seeding)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default ./results)
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// Truncation level K for the chain solver
    #[arg(long)]
    truncation: Option<u32>,
    /// Solver tolerance on the stationary residual
    #[arg(long)]
    tol: Option<f64>,
    /// Pass threshold for the stationary-relation residuals
    #[arg(long = "lemma-tol")]
    lemma_tol: Option<f64>,
    /// Departures (mps) or service starts (mros) to simulate
    #[arg(long)]
    customers: Option<u64>,
    /// Completions discarded before sampling starts
    #[arg(long)]
    warmup: Option<u64>,
    /// Keep every k-th post-warmup sample
    #[arg(long)]
    stride: Option<usize>,
    /// Confidence parameter δ (bands at level 1 − δ, KS level δ)
    #[arg(long)]
    delta: Option<f64>,
    /// Multiplier on the combined DKW band in compare
    #[arg(long)]
    slack: Option<f64>,
    /// Number of coupled runs
    #[arg(long)]
    replications: Option<usize>,
    /// Engine for simulate: mps or mros
    #[arg(long, value_enum)]
    policy: Option<PolicyChoice>,
    /// Initial per-class counts "n1,n2,…" (waiting customers for mros)
    #[arg(long)]
    initial: Option<String>,
    /// Tagged class for couple, 1-based
    #[arg(long)]
    class: Option<usize>,
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Solve(args) => commands::solve(&config::resolve("solve", args)?),
        Command::Simulate(args) => commands::simulate(&config::resolve("simulate", args)?),
        Command::Compare(args) => commands::compare(&config::resolve("compare", args)?),
        Command::Couple(args) => commands::couple(&config::resolve("couple", args)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::from(0),
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(error) => {
            eprintln!("error: {:#}", error.message());
            ExitCode::from(error.exit_code())
        }
    }
}
