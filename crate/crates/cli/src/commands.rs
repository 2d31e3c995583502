//! The four experiment commands. Each one writes its bulk CSV data plus a
//! JSON summary embedding the fully-resolved spec, prints a single verdict
//! line, and reports pass/fail through [`Outcome`].

use anyhow::Context;
use serde::Serialize;

use mps_mros::coupling::{conditional_law_check, ConditionalLawReport};
use mps_mros::ctmc::{
    build_mps_generator, build_mros_generator, verify_lemma, write_distribution_csv,
    StationaryDistribution,
};
use mps_mros::engines::{simulate_mps, simulate_mros, SimulationResult};
use mps_mros::stats::{mean_with_ci, mean_with_standard_error, theorem_check, EmpiricalTail, KsOutcome};

use crate::config::{PolicyChoice, ResolvedSpec};
use crate::output::{ensure_dir, file_in, write_csv, write_json};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    CheckFailed,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::CheckFailed
        }
    }
}

#[derive(Serialize)]
struct SolverStats {
    iterations: u64,
    residual: f64,
    truncation_mass: f64,
}

impl From<&StationaryDistribution> for SolverStats {
    fn from(solution: &StationaryDistribution) -> Self {
        Self {
            iterations: solution.iterations,
            residual: solution.residual,
            truncation_mass: solution.truncation_mass,
        }
    }
}

#[derive(Serialize)]
struct SolveSummary {
    spec: ResolvedSpec,
    rho: f64,
    interior_limit: u32,
    lemma_residual: f64,
    idle_residual: f64,
    geometric_residual: f64,
    mps_solver: SolverStats,
    mros_solver: SolverStats,
    pass: bool,
}

/// Solves both truncated chains, writes their stationary distributions and
/// the relation residuals. Passes when the relation holds within the
/// configured lemma tolerance.
pub fn solve(spec: &ResolvedSpec) -> Result<Outcome, CliError> {
    let config = spec.system_config()?;
    let report = verify_lemma(&config, spec.run.truncation, spec.run.tol)?;

    let out_dir = &spec.run.out_dir;
    ensure_dir(out_dir).map_err(CliError::Internal)?;

    let mps_generator = build_mps_generator(&config, spec.run.truncation)?;
    let mros_generator = build_mros_generator(&config, spec.run.truncation)?;
    write_csv_distribution(spec, "mps_stationary.csv", |mut writer| {
        write_distribution_csv(&mut writer, &mps_generator, &report.mps)
    })?;
    write_csv_distribution(spec, "mros_stationary.csv", |mut writer| {
        write_distribution_csv(&mut writer, &mros_generator, &report.mros)
    })?;

    let pass = report.lemma_residual <= spec.run.lemma_tol
        && report.idle_residual <= spec.run.lemma_tol;
    let summary = SolveSummary {
        spec: spec.clone(),
        rho: report.rho,
        interior_limit: report.interior_limit,
        lemma_residual: report.lemma_residual,
        idle_residual: report.idle_residual,
        geometric_residual: report.geometric_residual,
        mps_solver: SolverStats::from(&report.mps),
        mros_solver: SolverStats::from(&report.mros),
        pass,
    };
    write_json(&file_in(out_dir, "solve_summary.json"), &summary)
        .map_err(CliError::Internal)?;

    println!(
        "solve: lemma residual {:e}, idle residual {:e} (tolerance {:e}) — {}",
        report.lemma_residual,
        report.idle_residual,
        spec.run.lemma_tol,
        verdict(pass)
    );
    Ok(Outcome::from_pass(pass))
}

fn write_csv_distribution<F>(spec: &ResolvedSpec, name: &str, emit: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn std::io::Write) -> std::io::Result<()>,
{
    let path = file_in(&spec.run.out_dir, name);
    let file = std::fs::File::create(&path)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(CliError::Internal)?;
    let mut writer = std::io::BufWriter::new(file);
    emit(&mut writer as &mut dyn std::io::Write)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(CliError::Internal)?;
    Ok(())
}

#[derive(Serialize)]
struct ClassMoments {
    class: usize,
    recorded: usize,
    subsampled: usize,
    mean: Option<f64>,
    standard_error: Option<f64>,
    ci_halfwidth: Option<f64>,
    confidence: f64,
}

#[derive(Serialize)]
struct SimulateSummary {
    spec: ResolvedSpec,
    policy: PolicyChoice,
    arrivals: u64,
    completions: u64,
    discarded: u64,
    recorded: u64,
    final_clock: f64,
    busy_arrival_fraction: Option<f64>,
    mean_number_in_system: f64,
    per_class: Vec<ClassMoments>,
}

/// Runs one engine, writes the (stride-thinned) per-customer samples and a
/// moments summary.
pub fn simulate(spec: &ResolvedSpec) -> Result<Outcome, CliError> {
    let config = spec.system_config()?;
    let policy = spec.run.policy.expect("validated");
    let result: SimulationResult = match policy {
        PolicyChoice::Mps => simulate_mps(
            &config,
            &spec.initial_state(),
            spec.run.customers,
            spec.run.warmup,
            spec.run.seed,
        )?,
        PolicyChoice::Mros => simulate_mros(
            &config,
            &spec.initial_state(),
            spec.run.customers,
            spec.run.warmup,
            spec.run.seed,
        )?,
    };

    let out_dir = &spec.run.out_dir;
    ensure_dir(out_dir).map_err(CliError::Internal)?;

    let thinned = result.subsampled(spec.run.stride);
    write_csv(&file_in(out_dir, "samples.csv"), "class,value", |writer| {
        for (class, samples) in thinned.iter().enumerate() {
            for value in samples {
                writeln!(writer, "{},{}", class + 1, value)?;
            }
        }
        Ok(())
    })
    .map_err(CliError::Internal)?;

    let confidence = 1.0 - spec.run.delta;
    let per_class = thinned
        .iter()
        .enumerate()
        .map(|(class, samples)| {
            let moments = mean_with_ci(samples, confidence).ok();
            let error = mean_with_standard_error(samples).ok();
            ClassMoments {
                class: class + 1,
                recorded: result.samples[class].len(),
                subsampled: samples.len(),
                mean: moments.map(|(mean, _)| mean),
                standard_error: error.map(|(_, se)| se),
                ci_halfwidth: moments.map(|(_, half)| half),
                confidence,
            }
        })
        .collect();

    let summary = SimulateSummary {
        spec: spec.clone(),
        policy,
        arrivals: result.arrivals,
        completions: result.completions,
        discarded: result.discarded,
        recorded: result.recorded(),
        final_clock: result.final_clock,
        busy_arrival_fraction: result.busy_arrival_fraction,
        mean_number_in_system: result.mean_number_in_system(),
        per_class,
    };
    write_json(&file_in(out_dir, "simulate_summary.json"), &summary)
        .map_err(CliError::Internal)?;

    println!(
        "simulate ({policy}): {} recorded samples over {} completions",
        result.recorded(),
        result.completions
    );
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct ClassComparison {
    class: usize,
    sojourn_samples: usize,
    waiting_samples: usize,
    sup_discrepancy: f64,
    threshold: f64,
    pass: bool,
    /// Empirical P(W > 0); the tail identity pins it to ρ at t = 0.
    waiting_positive_fraction: f64,
    waiting_positive_se: f64,
}

#[derive(Serialize)]
struct CompareSummary {
    spec: ResolvedSpec,
    rho: f64,
    busy_arrival_fraction: Option<f64>,
    per_class: Vec<ClassComparison>,
    all_pass: bool,
}

/// Runs both engines on independent streams, applies the tail comparison
/// per class and writes the evaluation grid. Passes when every class does.
pub fn compare(spec: &ResolvedSpec) -> Result<Outcome, CliError> {
    let config = spec.system_config()?;
    let rho = config.load();
    let initial = spec.initial_state();
    let mps = simulate_mps(
        &config,
        &initial,
        spec.run.customers,
        spec.run.warmup,
        spec.run.seed,
    )?;
    let mros = simulate_mros(
        &config,
        &initial,
        spec.run.customers,
        spec.run.warmup,
        spec.run.seed,
    )?;

    let sojourns = mps.subsampled(spec.run.stride);
    let waits = mros.subsampled(spec.run.stride);

    let out_dir = &spec.run.out_dir;
    ensure_dir(out_dir).map_err(CliError::Internal)?;

    let mut per_class = Vec::with_capacity(config.num_classes());
    let mut rows: Vec<(usize, mps_mros::stats::TailComparisonReport)> = Vec::new();
    for class in 0..config.num_classes() {
        let sojourn_tail = EmpiricalTail::from_samples(&sojourns[class])?;
        let waiting_tail = EmpiricalTail::from_samples(&waits[class])?;
        let report = theorem_check(
            &sojourn_tail,
            &waiting_tail,
            rho,
            spec.run.delta,
            spec.run.slack,
            spec.run.grid,
        )?;
        let positive = waiting_tail.survival(0.0);
        let n = waiting_tail.len() as f64;
        per_class.push(ClassComparison {
            class: class + 1,
            sojourn_samples: report.sojourn_samples,
            waiting_samples: report.waiting_samples,
            sup_discrepancy: report.sup_discrepancy,
            threshold: report.threshold,
            pass: report.pass,
            waiting_positive_fraction: positive,
            waiting_positive_se: (positive * (1.0 - positive) / n).sqrt(),
        });
        rows.push((class, report));
    }

    write_csv(
        &file_in(out_dir, "comparison.csv"),
        "class,t,scaled_sojourn_tail,waiting_tail,discrepancy",
        |writer| {
            for (class, report) in &rows {
                for point in &report.grid {
                    writeln!(
                        writer,
                        "{},{},{},{},{}",
                        class + 1,
                        point.t,
                        point.scaled_sojourn_tail,
                        point.waiting_tail,
                        point.discrepancy
                    )?;
                }
            }
            Ok(())
        },
    )
    .map_err(CliError::Internal)?;

    let all_pass = per_class.iter().all(|row| row.pass);
    let summary = CompareSummary {
        spec: spec.clone(),
        rho,
        busy_arrival_fraction: mros.busy_arrival_fraction,
        per_class,
        all_pass,
    };
    write_json(&file_in(out_dir, "compare_summary.json"), &summary)
        .map_err(CliError::Internal)?;

    for row in &summary.per_class {
        println!(
            "compare class {}: sup discrepancy {:.6} vs threshold {:.6} — {}",
            row.class,
            row.sup_discrepancy,
            row.threshold,
            verdict(row.pass)
        );
    }
    Ok(Outcome::from_pass(all_pass))
}

#[derive(Serialize)]
struct CoupleSummary {
    spec: ResolvedSpec,
    replications: usize,
    all_pairs_equal: bool,
    sojourn_ks: KsOutcome,
    waiting_ks: KsOutcome,
    mean_completion_epochs: f64,
    pass: bool,
}

/// Runs the coupled construction with conditional-law checks and writes
/// per-run tagged times. Passes when every run's two times are exactly
/// equal and both KS tests accept.
pub fn couple(spec: &ResolvedSpec) -> Result<Outcome, CliError> {
    let config = spec.system_config()?;
    let report: ConditionalLawReport = conditional_law_check(
        &config,
        &spec.initial_state(),
        spec.class_index(),
        spec.run.replications,
        spec.run.delta,
        spec.run.seed,
    )?;

    let out_dir = &spec.run.out_dir;
    ensure_dir(out_dir).map_err(CliError::Internal)?;

    write_csv(
        &file_in(out_dir, "coupled_runs.csv"),
        "run,sojourn,waiting,completion_epochs",
        |writer| {
            for (index, run) in report.coupled_runs.iter().enumerate() {
                writeln!(
                    writer,
                    "{},{},{},{}",
                    index, run.tagged_sojourn, run.tagged_waiting, run.completion_epochs
                )?;
            }
            Ok(())
        },
    )
    .map_err(CliError::Internal)?;

    let mean_epochs = report
        .coupled_runs
        .iter()
        .map(|r| r.completion_epochs as f64)
        .sum::<f64>()
        / report.coupled_runs.len() as f64;
    let pass = report.pass();
    let summary = CoupleSummary {
        spec: spec.clone(),
        replications: report.replications,
        all_pairs_equal: report.all_pairs_equal,
        sojourn_ks: report.sojourn_ks,
        waiting_ks: report.waiting_ks,
        mean_completion_epochs: mean_epochs,
        pass,
    };
    write_json(&file_in(out_dir, "couple_summary.json"), &summary)
        .map_err(CliError::Internal)?;

    println!(
        "couple: {} runs, pairwise equality {}, sojourn KS {:.5}, waiting KS {:.5} — {}",
        report.replications,
        if report.all_pairs_equal { "exact" } else { "VIOLATED" },
        report.sojourn_ks.statistic,
        report.waiting_ks.statistic,
        verdict(pass)
    );
    Ok(Outcome::from_pass(pass))
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
