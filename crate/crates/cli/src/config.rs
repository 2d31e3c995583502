//! Experiment configuration: JSON file, flag overrides, defaults.
//!
//! Precedence is flags > file > defaults. The fully-resolved spec is
//! embedded in every JSON summary so a result file identifies the exact
//! run that produced it.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use mps_mros::model::{Cap, StateVector, SystemConfig};

use crate::{CliError, RunArgs};

pub const DEFAULT_TRUNCATION: u32 = 40;
pub const DEFAULT_SOLVER_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_LEMMA_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_CUSTOMERS: u64 = 1_000_000;
pub const DEFAULT_WARMUP: u64 = 10_000;
pub const DEFAULT_STRIDE: usize = 16;
pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_SLACK: f64 = 3.0;
pub const DEFAULT_REPLICATIONS: usize = 10_000;
pub const DEFAULT_GRID: usize = 512;
pub const DEFAULT_MAX_ITERATIONS: u64 = 500_000;
pub const DEFAULT_OUT_DIR: &str = "./results";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSpec {
    system: SystemSection,
    #[serde(default)]
    run: RunSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    num_classes: usize,
    lambda: Vec<f64>,
    p: Vec<f64>,
    alpha: Vec<Cap>,
    mu: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    seed: Option<u64>,
    truncation: Option<u32>,
    tol: Option<f64>,
    lemma_tol: Option<f64>,
    customers: Option<u64>,
    warmup: Option<u64>,
    stride: Option<usize>,
    delta: Option<f64>,
    slack: Option<f64>,
    replications: Option<usize>,
    grid: Option<usize>,
    max_iterations: Option<u64>,
    policy: Option<PolicyChoice>,
    initial: Option<Vec<u32>>,
    class: Option<usize>,
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum PolicyChoice {
    Mps,
    Mros,
}

impl std::fmt::Display for PolicyChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        match self {
            PolicyChoice::Mps => write!(f, "mps"),
            PolicyChoice::Mros => write!(f, "mros"),
        }
    }
}

/// System parameters as they appear in config files and summaries.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedSystem {
    pub num_classes: usize,
    pub lambda: Vec<f64>,
    pub p: Vec<f64>,
    pub alpha: Vec<Cap>,
    pub mu: f64,
}

/// Every knob with defaults expanded; serialized into summaries verbatim.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedRun {
    pub command: String,
    pub seed: u64,
    pub truncation: u32,
    pub tol: f64,
    pub lemma_tol: f64,
    pub customers: u64,
    pub warmup: u64,
    pub stride: usize,
    pub delta: f64,
    pub slack: f64,
    pub replications: usize,
    pub grid: usize,
    pub max_iterations: u64,
    pub policy: Option<PolicyChoice>,
    pub initial: Vec<u32>,
    /// Tagged class, 1-based as in the CSV outputs.
    pub class: usize,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedSpec {
    pub system: ResolvedSystem,
    pub run: ResolvedRun,
}

impl ResolvedSpec {
    pub fn system_config(&self) -> Result<SystemConfig, CliError> {
        SystemConfig::new(
            self.system.lambda.clone(),
            self.system.p.clone(),
            self.system.alpha.clone(),
            self.system.mu,
        )
        .map_err(|e| CliError::Config(anyhow!(e)))
    }

    pub fn initial_state(&self) -> StateVector {
        StateVector::new(self.run.initial.clone())
    }

    /// Tagged class as a 0-based index.
    pub fn class_index(&self) -> usize {
        self.run.class - 1
    }
}

fn parse_initial(text: &str) -> anyhow::Result<Vec<u32>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<u32>()
                .with_context(|| format!("bad count {:?} in --initial", part.trim()))
        })
        .collect()
}

/// Loads the config file and folds in flag overrides and defaults.
pub fn resolve(command: &str, args: &RunArgs) -> Result<ResolvedSpec, CliError> {
    let spec = load_file(&args.config).map_err(CliError::Config)?;
    let system = spec.system;
    let run = spec.run;

    let initial = match &args.initial {
        Some(text) => parse_initial(text).map_err(CliError::Config)?,
        None => run
            .initial
            .clone()
            .unwrap_or_else(|| vec![0; system.num_classes]),
    };

    let resolved = ResolvedSpec {
        system: ResolvedSystem {
            num_classes: system.num_classes,
            lambda: system.lambda,
            p: system.p,
            alpha: system.alpha,
            mu: system.mu,
        },
        run: ResolvedRun {
            command: command.to_string(),
            seed: args
                .seed
                .or(run.seed)
                .ok_or_else(|| CliError::Config(anyhow!("seed is required (flag --seed or run.seed); wall-clock seeding is not supported")))?,
            truncation: args.truncation.or(run.truncation).unwrap_or(DEFAULT_TRUNCATION),
            tol: args.tol.or(run.tol).unwrap_or(DEFAULT_SOLVER_TOLERANCE),
            lemma_tol: args
                .lemma_tol
                .or(run.lemma_tol)
                .unwrap_or(DEFAULT_LEMMA_TOLERANCE),
            customers: args.customers.or(run.customers).unwrap_or(DEFAULT_CUSTOMERS),
            warmup: args.warmup.or(run.warmup).unwrap_or(DEFAULT_WARMUP),
            stride: args.stride.or(run.stride).unwrap_or(DEFAULT_STRIDE),
            delta: args.delta.or(run.delta).unwrap_or(DEFAULT_DELTA),
            slack: args.slack.or(run.slack).unwrap_or(DEFAULT_SLACK),
            replications: args
                .replications
                .or(run.replications)
                .unwrap_or(DEFAULT_REPLICATIONS),
            grid: run.grid.unwrap_or(DEFAULT_GRID),
            max_iterations: run.max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS),
            policy: args.policy.or(run.policy),
            initial,
            class: args.class.or(run.class).unwrap_or(1),
            out_dir: args
                .out_dir
                .clone()
                .or(run.out_dir)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        },
    };
    validate(&resolved)?;
    Ok(resolved)
}

fn load_file(path: &Path) -> anyhow::Result<FileSpec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("cannot parse config file {}", path.display()))
}

fn validate(spec: &ResolvedSpec) -> Result<(), CliError> {
    let bad = |message: anyhow::Error| Err(CliError::Config(message));
    let system = &spec.system;
    if system.num_classes != system.lambda.len() {
        return bad(anyhow!(
            "num_classes is {} but lambda has {} entries",
            system.num_classes,
            system.lambda.len()
        ));
    }
    // Stability and positivity are enforced here so bad files fail before
    // any work happens.
    spec.system_config()?;

    let run = &spec.run;
    if run.customers == 0 {
        return bad(anyhow!("customers must be at least 1"));
    }
    if run.warmup >= run.customers {
        return bad(anyhow!(
            "warmup ({}) must be smaller than customers ({})",
            run.warmup,
            run.customers
        ));
    }
    if run.stride == 0 {
        return bad(anyhow!("stride must be at least 1"));
    }
    if !(run.delta > 0.0 && run.delta < 1.0) {
        return bad(anyhow!("delta must lie in (0, 1), got {}", run.delta));
    }
    if !(run.slack >= 1.0) {
        return bad(anyhow!("slack must be at least 1, got {}", run.slack));
    }
    if run.truncation == 0 {
        return bad(anyhow!("truncation must be at least 1"));
    }
    if !(run.tol > 0.0 && run.tol.is_finite()) {
        return bad(anyhow!("tol must be positive, got {}", run.tol));
    }
    if !(run.lemma_tol > 0.0 && run.lemma_tol.is_finite()) {
        return bad(anyhow!("lemma-tol must be positive, got {}", run.lemma_tol));
    }
    if run.initial.len() != system.num_classes {
        return bad(anyhow!(
            "initial state has {} entries for {} classes",
            run.initial.len(),
            system.num_classes
        ));
    }
    if run.class == 0 || run.class > system.num_classes {
        return bad(anyhow!(
            "class must lie in 1..={}, got {}",
            system.num_classes,
            run.class
        ));
    }
    if spec.run.command == "couple" && run.replications < 2 {
        return bad(anyhow!(
            "at least 2 replications are required for the conditional-law checks, got {}",
            run.replications
        ));
    }
    if spec.run.command == "simulate" && run.policy.is_none() {
        return bad(anyhow!("simulate requires --policy mps|mros"));
    }
    Ok(())
}
