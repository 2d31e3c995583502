//! Exact stationary analysis of the two policy chains on truncated state
//! spaces.
//!
//! The MPS chain lives on the customer-count vectors `n̄` with `|n̄| ≤ K`;
//! the MROS chain lives on an idle marker plus busy states `(1, n̄)` where
//! `n̄` counts waiting customers. Truncation censors arrivals at the
//! boundary `|n̄| = K`, which keeps all probability mass inside and leaves
//! the chains irreducible; the induced bias decays like `ρ^K`, so residual
//! comparisons are restricted to interior states.
//!
//! [`verify_lemma`] solves both chains and measures how far the pair is
//! from the exact relation `π̂(1, n̄) = ρ·π(n̄)`, `π̂(0, 0̄) = 1 − ρ`, which
//! is what turns the pathwise coupling equality into the unconditional
//! tail identity.

use std::collections::HashMap;
use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::model::{ModelError, StateVector, SystemConfig};

/// Hard ceiling on enumerated states; `C(K+N, N)` grows fast in both
/// arguments and anything near this limit is outside the tool's remit.
pub const MAX_STATES: u64 = 2_000_000;

/// Iteration budget used by [`verify_lemma`].
pub const DEFAULT_MAX_ITERATIONS: u64 = 500_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CtmcError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("truncation level must be at least 1")]
    TruncationTooSmall,
    #[error("state space with {states} states exceeds the limit of {limit}")]
    StateSpaceTooLarge { states: u64, limit: u64 },
    #[error("tolerance must be positive and finite, got {value}")]
    BadTolerance { value: f64 },
    #[error(
        "solver did not reach residual {tolerance:e} within {iterations} iterations \
         (last residual {residual:e})"
    )]
    NonConvergence {
        iterations: u64,
        residual: f64,
        tolerance: f64,
    },
    #[error("chain is reducible: state {state} carries no stationary mass")]
    ReducibleChain { state: String },
}

/// Which chain a state space describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChainKind {
    Mps,
    Mros,
}

/// Enumerated truncated state space with a bijective ordinal map.
///
/// Count vectors are listed in graded lexicographic order (by total, then
/// lexicographic). For MROS the idle marker takes ordinal 0 and busy states
/// follow at `1 + position`.
#[derive(Debug, Clone)]
pub struct TruncatedStateSpace {
    num_classes: usize,
    truncation: u32,
    kind: ChainKind,
    counts: Vec<StateVector>,
    ordinals: HashMap<StateVector, usize>,
}

impl TruncatedStateSpace {
    pub fn mps(num_classes: usize, truncation: u32) -> Result<Self, CtmcError> {
        Self::build(num_classes, truncation, ChainKind::Mps)
    }

    pub fn mros(num_classes: usize, truncation: u32) -> Result<Self, CtmcError> {
        Self::build(num_classes, truncation, ChainKind::Mros)
    }

    fn build(num_classes: usize, truncation: u32, kind: ChainKind) -> Result<Self, CtmcError> {
        if truncation == 0 {
            return Err(CtmcError::TruncationTooSmall);
        }
        let states = count_states(num_classes, truncation);
        if states > MAX_STATES {
            return Err(CtmcError::StateSpaceTooLarge {
                states,
                limit: MAX_STATES,
            });
        }

        let mut counts = Vec::with_capacity(states as usize);
        let mut scratch = vec![0u32; num_classes];
        for total in 0..=truncation {
            push_compositions(&mut counts, &mut scratch, 0, total);
        }
        let ordinals = counts
            .iter()
            .enumerate()
            .map(|(position, state)| (state.clone(), position))
            .collect();
        Ok(Self {
            num_classes,
            truncation,
            kind,
            counts,
            ordinals,
        })
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    /// Number of chain states (busy count vectors, plus idle for MROS).
    pub fn len(&self) -> usize {
        match self.kind {
            ChainKind::Mps => self.counts.len(),
            ChainKind::Mros => self.counts.len() + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Count vectors in enumeration order (for MROS these are the waiting
    /// vectors of the busy states).
    pub fn count_vectors(&self) -> &[StateVector] {
        &self.counts
    }

    /// Ordinal of the idle marker; MROS only.
    pub fn idle_ordinal(&self) -> Option<usize> {
        match self.kind {
            ChainKind::Mps => None,
            ChainKind::Mros => Some(0),
        }
    }

    /// Ordinal of the (busy, for MROS) state with these counts.
    pub fn ordinal_of(&self, counts: &StateVector) -> Option<usize> {
        let position = *self.ordinals.get(counts)?;
        Some(match self.kind {
            ChainKind::Mps => position,
            ChainKind::Mros => position + 1,
        })
    }

    /// Counts of a (busy) state; `None` for the MROS idle marker.
    pub fn counts_of(&self, ordinal: usize) -> Option<&StateVector> {
        match self.kind {
            ChainKind::Mps => self.counts.get(ordinal),
            ChainKind::Mros => {
                if ordinal == 0 {
                    None
                } else {
                    self.counts.get(ordinal - 1)
                }
            }
        }
    }

    /// Total customer count of a state; the idle marker counts zero.
    pub fn total_of(&self, ordinal: usize) -> u32 {
        self.counts_of(ordinal).map_or(0, StateVector::total)
    }

    /// CSV label: comma-joined counts, prefixed by the busy flag for MROS.
    pub fn label(&self, ordinal: usize) -> String {
        match self.kind {
            ChainKind::Mps => self.counts[ordinal].to_string(),
            ChainKind::Mros => match self.counts_of(ordinal) {
                None => format!("0,{}", StateVector::zeros(self.num_classes)),
                Some(counts) => format!("1,{counts}"),
            },
        }
    }
}

/// `C(K+N, N)`, saturating far above [`MAX_STATES`].
fn count_states(num_classes: usize, truncation: u32) -> u64 {
    let mut result: u64 = 1;
    for i in 1..=num_classes as u64 {
        result = result.saturating_mul(truncation as u64 + i);
        result /= i;
        if result > 100 * MAX_STATES {
            return result;
        }
    }
    result
}

fn push_compositions(
    out: &mut Vec<StateVector>,
    scratch: &mut Vec<u32>,
    class: usize,
    remaining: u32,
) {
    if class + 1 == scratch.len() {
        scratch[class] = remaining;
        out.push(StateVector::new(scratch.clone()));
        return;
    }
    for value in 0..=remaining {
        scratch[class] = value;
        push_compositions(out, scratch, class + 1, remaining - value);
    }
}

/// Sparse conservative generator: off-diagonal transition triples with the
/// diagonal implied as the negative row sum.
#[derive(Debug, Clone)]
pub struct SparseGenerator {
    space: TruncatedStateSpace,
    transitions: Vec<(u32, u32, f64)>,
    out_rates: Vec<f64>,
}

impl SparseGenerator {
    fn new(space: TruncatedStateSpace) -> Self {
        let states = space.len();
        Self {
            space,
            transitions: Vec::new(),
            out_rates: vec![0.0; states],
        }
    }

    fn add(&mut self, from: usize, to: usize, rate: f64) {
        debug_assert!(from != to, "self-transitions are implicit");
        debug_assert!(rate.is_finite() && rate > 0.0, "rate must be positive");
        self.transitions.push((from as u32, to as u32, rate));
        self.out_rates[from] += rate;
    }

    pub fn space(&self) -> &TruncatedStateSpace {
        &self.space
    }

    pub fn num_states(&self) -> usize {
        self.out_rates.len()
    }

    pub fn transitions(&self) -> &[(u32, u32, f64)] {
        &self.transitions
    }

    /// Total departure rate of a state (the negated diagonal entry).
    pub fn out_rate(&self, ordinal: usize) -> f64 {
        self.out_rates[ordinal]
    }

    /// `‖πQ‖∞` for an arbitrary probability vector.
    pub fn residual(&self, probabilities: &[f64]) -> f64 {
        self.flow(probabilities)
            .iter()
            .fold(0.0f64, |sup, &x| sup.max(x.abs()))
    }

    /// Per-coordinate `πQ` (net probability flow into each state).
    pub fn flow(&self, probabilities: &[f64]) -> Vec<f64> {
        assert_eq!(probabilities.len(), self.num_states());
        let mut flow: Vec<f64> = probabilities
            .iter()
            .zip(&self.out_rates)
            .map(|(&p, &rate)| -p * rate)
            .collect();
        for &(from, to, rate) in &self.transitions {
            flow[to as usize] += probabilities[from as usize] * rate;
        }
        flow
    }
}

/// Generator of the MPS(ᾱ) chain on `{n̄ : |n̄| ≤ K}`: arrivals at rate
/// `λ_i` (censored at the boundary), departures at rate `μ·w_i(n̄)`.
pub fn build_mps_generator(
    config: &SystemConfig,
    truncation: u32,
) -> Result<SparseGenerator, CtmcError> {
    let space = TruncatedStateSpace::mps(config.num_classes(), truncation)?;
    let mut generator = SparseGenerator::new(space);
    let num_states = generator.space.count_vectors().len();
    for position in 0..num_states {
        let counts = generator.space.count_vectors()[position].clone();
        if counts.total() < truncation {
            for class in 0..config.num_classes() {
                let to = generator
                    .space
                    .ordinal_of(&counts.with_arrival(class))
                    .expect("arrival target inside truncation");
                generator.add(position, to, config.arrival_rate(class));
            }
        }
        if !counts.is_empty() {
            let weights = config.selection_weights(&counts).expect("non-empty state");
            for (class, &weight) in weights.iter().enumerate() {
                if weight > 0.0 {
                    let target = counts.with_departure(class).expect("class occupied");
                    let to = generator
                        .space
                        .ordinal_of(&target)
                        .expect("departure target enumerated");
                    generator.add(position, to, config.service_rate() * weight);
                }
            }
        }
    }
    Ok(generator)
}

/// Generator of the MROS(ᾱ) chain on `{idle} ∪ {(1, n̄) : |n̄| ≤ K}` with
/// `n̄` the waiting vector: arrivals join the waiting queues (censored at
/// the boundary), completions promote a waiting class-`i` customer with
/// probability `w_i(n̄)`, and a completion with nobody waiting idles the
/// server.
pub fn build_mros_generator(
    config: &SystemConfig,
    truncation: u32,
) -> Result<SparseGenerator, CtmcError> {
    let space = TruncatedStateSpace::mros(config.num_classes(), truncation)?;
    let mut generator = SparseGenerator::new(space);
    let idle = generator.space.idle_ordinal().expect("mros space");
    let empty = StateVector::zeros(config.num_classes());
    let busy_empty = generator
        .space
        .ordinal_of(&empty)
        .expect("empty waiting state");

    // An arrival to the idle server enters service directly: the waiting
    // vector stays empty but the server turns busy.
    generator.add(idle, busy_empty, config.total_arrival_rate());

    let num_busy = generator.space.count_vectors().len();
    for position in 0..num_busy {
        let counts = generator.space.count_vectors()[position].clone();
        let ordinal = position + 1;
        if counts.total() < truncation {
            for class in 0..config.num_classes() {
                let to = generator
                    .space
                    .ordinal_of(&counts.with_arrival(class))
                    .expect("arrival target inside truncation");
                generator.add(ordinal, to, config.arrival_rate(class));
            }
        }
        if counts.is_empty() {
            generator.add(ordinal, idle, config.service_rate());
        } else {
            let weights = config.selection_weights(&counts).expect("non-empty state");
            for (class, &weight) in weights.iter().enumerate() {
                if weight > 0.0 {
                    let target = counts.with_departure(class).expect("class occupied");
                    let to = generator
                        .space
                        .ordinal_of(&target)
                        .expect("promotion target enumerated");
                    generator.add(ordinal, to, config.service_rate() * weight);
                }
            }
        }
    }
    Ok(generator)
}

/// Stationary distribution of a truncated chain with solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub probabilities: Vec<f64>,
    /// `‖πQ‖∞` at termination.
    pub residual: f64,
    pub iterations: u64,
    /// Probability of states with total count ≥ K − 1, a proxy for how much
    /// the censoring boundary matters.
    pub truncation_mass: f64,
}

/// Solves `πQ = 0, Σπ = 1` by power iteration on the uniformized kernel
/// `P = I + Q/Θ` with `Θ` the maximal out-rate (`Λ + μ` for these chains).
pub fn solve_stationary(
    generator: &SparseGenerator,
    tolerance: f64,
    max_iterations: u64,
) -> Result<StationaryDistribution, CtmcError> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(CtmcError::BadTolerance { value: tolerance });
    }
    let states = generator.num_states();
    let theta = generator
        .out_rates
        .iter()
        .fold(0.0f64, |sup, &r| sup.max(r));

    let mut current = vec![1.0 / states as f64; states];
    let mut next = vec![0.0f64; states];
    let mut iterations = 0u64;
    let mut residual = generator.residual(&current);

    const CHECK_EVERY: u64 = 32;
    while residual > tolerance {
        if iterations >= max_iterations {
            return Err(CtmcError::NonConvergence {
                iterations,
                residual,
                tolerance,
            });
        }
        let burst = CHECK_EVERY.min(max_iterations - iterations);
        for _ in 0..burst {
            for (position, value) in next.iter_mut().enumerate() {
                *value = current[position] * (1.0 - generator.out_rates[position] / theta);
            }
            for &(from, to, rate) in &generator.transitions {
                next[to as usize] += current[from as usize] * (rate / theta);
            }
            let total: f64 = next.iter().sum();
            for value in &mut next {
                *value /= total;
            }
            std::mem::swap(&mut current, &mut next);
            iterations += 1;
        }
        residual = generator.residual(&current);
    }

    // A state left with essentially no mass means the chain was not
    // irreducible on the enumerated space.
    for (ordinal, &probability) in current.iter().enumerate() {
        if probability < 1e-250 {
            return Err(CtmcError::ReducibleChain {
                state: generator.space.label(ordinal),
            });
        }
    }

    let boundary = generator.space.truncation().saturating_sub(1);
    let truncation_mass = current
        .iter()
        .enumerate()
        .filter(|(ordinal, _)| generator.space.total_of(*ordinal) >= boundary)
        .map(|(_, &probability)| probability)
        .sum();

    Ok(StationaryDistribution {
        probabilities: current,
        residual,
        iterations,
        truncation_mass,
    })
}

/// Residuals of the exact stationary relation between the two chains.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub rho: f64,
    pub truncation: u32,
    /// States with total count up to this bound enter the residuals.
    pub interior_limit: u32,
    /// `max |π̂(1, n̄) − ρ·π(n̄)|` over interior states.
    pub lemma_residual: f64,
    /// `|π̂(0, 0̄) − (1 − ρ)|`.
    pub idle_residual: f64,
    /// `max_n |Σ_{|n̄|=n} π(n̄) − (1 − ρ)ρⁿ|` over interior totals.
    pub geometric_residual: f64,
    pub mps: StationaryDistribution,
    pub mros: StationaryDistribution,
}

/// Solves both chains at truncation `K` and measures the distance to
/// `π̂(1, n̄) = ρ·π(n̄)` on interior states (`|n̄| ≤ K − 10`), plus the idle
/// identity and the geometric law of the MPS total-count marginal.
pub fn verify_lemma(
    config: &SystemConfig,
    truncation: u32,
    tolerance: f64,
) -> Result<LemmaReport, CtmcError> {
    let mps_generator = build_mps_generator(config, truncation)?;
    let mros_generator = build_mros_generator(config, truncation)?;
    let mps = solve_stationary(&mps_generator, tolerance, DEFAULT_MAX_ITERATIONS)?;
    let mros = solve_stationary(&mros_generator, tolerance, DEFAULT_MAX_ITERATIONS)?;

    let rho = config.load();
    let interior_limit = truncation.saturating_sub(10);

    let mut lemma_residual = 0.0f64;
    let count_vectors = mps_generator.space().count_vectors();
    for (position, counts) in count_vectors.iter().enumerate() {
        if counts.total() > interior_limit {
            continue;
        }
        let mps_probability = mps.probabilities[position];
        let mros_probability = mros.probabilities[position + 1];
        lemma_residual = lemma_residual.max((mros_probability - rho * mps_probability).abs());
    }

    let idle_residual = (mros.probabilities[0] - (1.0 - rho)).abs();

    let mut level_mass = vec![0.0f64; truncation as usize + 1];
    for (position, counts) in count_vectors.iter().enumerate() {
        level_mass[counts.total() as usize] += mps.probabilities[position];
    }
    let mut geometric_residual = 0.0f64;
    for (total, &mass) in level_mass.iter().enumerate() {
        if total as u32 > interior_limit {
            break;
        }
        let expected = (1.0 - rho) * rho.powi(total as i32);
        geometric_residual = geometric_residual.max((mass - expected).abs());
    }

    Ok(LemmaReport {
        rho,
        truncation,
        interior_limit,
        lemma_residual,
        idle_residual,
        geometric_residual,
        mps,
        mros,
    })
}

/// Writes `state;probability` rows (header included) for a solved chain.
pub fn write_distribution_csv<W: Write>(
    writer: &mut W,
    generator: &SparseGenerator,
    distribution: &StationaryDistribution,
) -> io::Result<()> {
    writeln!(writer, "state;probability")?;
    for (ordinal, &probability) in distribution.probabilities.iter().enumerate() {
        writeln!(
            writer,
            "{};{}",
            generator.space().label(ordinal),
            probability
        )?;
    }
    Ok(())
}
