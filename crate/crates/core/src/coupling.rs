//! Joint construction driving one MPS and one MROS system from shared
//! randomness.
//!
//! At epoch zero the MPS replica holds the initial customers plus a tagged
//! arrival; the MROS replica holds the same customers waiting, the same
//! tagged arrival, and one extra unpaired customer in service. Matching
//! customers form pairs identified by class and queue position. A single
//! Poisson arrival stream appends new pairs to both replicas, and a single
//! sequence of exponential completion gaps drives both: at each completion
//! epoch one pair is drawn — class `i` with weight `w_i(n̄)`, position
//! uniform in the eligible prefix — whereupon the MPS member departs and
//! the MROS member enters service.
//!
//! Because the tagged pair leaves both replicas at the same epoch, its MPS
//! sojourn and MROS waiting time coincide exactly, run by run. That makes
//! the two conditional laws equal provided each replica, viewed on its own,
//! runs the correct marginal dynamics — which [`conditional_law_check`]
//! tests against the uncoupled engines.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::engines::{
    check_tagged, conditional_sojourn_mps, conditional_waiting_mros, exponential,
    sample_class_by_rate, sample_completion, CustomerRecord, EngineError, MpsSystem, MrosSystem,
};
use crate::model::{StateVector, SystemConfig};
use crate::rng::{self, StreamDomain};
use crate::stats::{two_sample_ks, EmpiricalTail, KsOutcome, StatsError};

/// Completion epochs allowed before a run is declared broken. Selection of
/// the tagged pair has probability bounded away from zero in every state,
/// so hitting this cap signals a bug rather than bad luck.
pub const DEFAULT_EPOCH_CAP: u64 = 1_000_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("coupled run exceeded {cap} completion epochs without selecting the tagged pair")]
    EpochCapExceeded { cap: u64 },
    #[error("at least 2 replications are required, got {got}")]
    TooFewReplications { got: usize },
}

/// Outcome of one coupled run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoupledRunResult {
    /// Tagged customer's sojourn in the MPS replica.
    pub tagged_sojourn: f64,
    /// Tagged customer's waiting time in the MROS replica.
    pub tagged_waiting: f64,
    /// Completion epochs processed, including the selecting one.
    pub completion_epochs: u64,
    pub seed: u64,
}

/// Runs one coupled realization with a dedicated stream of `seed`.
pub fn run_coupled(
    config: &SystemConfig,
    initial_state: &StateVector,
    tagged_class: usize,
    seed: u64,
) -> Result<CoupledRunResult, CouplingError> {
    let mut rng = rng::stream(seed, StreamDomain::CoupledRun, 0);
    run_coupled_with(
        config,
        initial_state,
        tagged_class,
        DEFAULT_EPOCH_CAP,
        seed,
        &mut rng,
    )
}

/// Worker behind [`run_coupled`]; replications drive it with their own
/// streams and an explicit epoch cap.
pub fn run_coupled_with(
    config: &SystemConfig,
    initial_state: &StateVector,
    tagged_class: usize,
    epoch_cap: u64,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<CoupledRunResult, CouplingError> {
    check_tagged(config, initial_state, tagged_class)?;

    let mut mps = MpsSystem::new(config.num_classes());
    let mut mros = MrosSystem::new(config.num_classes());
    // The MROS replica's service position starts occupied by the unpaired
    // customer; the first completion gap is its residual service, valid by
    // memorylessness.
    mros.set_occupant(CustomerRecord::new(u64::MAX, 0, 0.0));

    let mut next_id = 0u64;
    for class in 0..initial_state.len() {
        for _ in 0..initial_state.count(class) {
            mps.admit(CustomerRecord::new(next_id, class, 0.0), config);
            mros.admit_waiting(CustomerRecord::new(next_id, class, 0.0));
            next_id += 1;
        }
    }
    let tagged_id = next_id;
    mps.admit(CustomerRecord::new(tagged_id, tagged_class, 0.0), config);
    mros.admit_waiting(CustomerRecord::new(tagged_id, tagged_class, 0.0));
    next_id += 1;

    let mut clock;
    let mut next_arrival = exponential(rng, config.total_arrival_rate());
    let mut next_completion = exponential(rng, config.service_rate());
    let mut epochs = 0u64;

    loop {
        debug_assert_eq!(mps.counts(), mros.waiting_counts());
        if next_arrival <= next_completion {
            clock = next_arrival;
            let class = sample_class_by_rate(
                rng,
                config.arrival_rates(),
                config.total_arrival_rate(),
            );
            mps.admit(CustomerRecord::new(next_id, class, clock), config);
            mros.admit_waiting(CustomerRecord::new(next_id, class, clock));
            next_id += 1;
            next_arrival = clock + exponential(rng, config.total_arrival_rate());
        } else {
            clock = next_completion;
            epochs += 1;
            if epochs > epoch_cap {
                return Err(CouplingError::EpochCapExceeded { cap: epoch_cap });
            }
            if !mps.counts().is_empty() {
                let (class, position) = sample_completion(rng, config, mps.counts());
                let departed = mps.remove(class, position, clock, config);
                mros.complete(clock);
                let started = mros.start_service(class, position, clock);
                debug_assert_eq!(departed.id, started.id);
                if departed.id == tagged_id {
                    let tagged_sojourn = departed
                        .departure_epoch
                        .expect("departure stamped")
                        - departed.arrival_epoch;
                    let tagged_waiting = started
                        .service_start_epoch
                        .expect("start stamped")
                        - started.arrival_epoch;
                    return Ok(CoupledRunResult {
                        tagged_sojourn,
                        tagged_waiting,
                        completion_epochs: epochs,
                        seed,
                    });
                }
            }
            // An epoch with no pairs present consumes its gap and does
            // nothing; unreachable while the tagged pair is in the system.
            next_completion = clock + exponential(rng, config.service_rate());
        }
    }
}

/// Comparison of the coupled construction's marginals against the
/// uncoupled engines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalLawReport {
    pub replications: usize,
    pub alpha: f64,
    /// Coupled sojourn samples vs. uncoupled conditional MPS sojourns.
    pub sojourn_ks: KsOutcome,
    /// Coupled waiting samples vs. uncoupled conditional MROS waits.
    pub waiting_ks: KsOutcome,
    /// Every coupled run produced identical sojourn and waiting values.
    pub all_pairs_equal: bool,
    #[serde(skip)]
    pub coupled_runs: Vec<CoupledRunResult>,
}

impl ConditionalLawReport {
    pub fn pass(&self) -> bool {
        self.all_pairs_equal && self.sojourn_ks.pass && self.waiting_ks.pass
    }
}

/// Runs `replications` coupled realizations plus the same number of
/// uncoupled conditional runs of each engine, and KS-tests the coupled
/// marginals against the uncoupled ones at level `alpha`.
pub fn conditional_law_check(
    config: &SystemConfig,
    initial_state: &StateVector,
    tagged_class: usize,
    replications: usize,
    alpha: f64,
    seed: u64,
) -> Result<ConditionalLawReport, CouplingError> {
    if replications < 2 {
        return Err(CouplingError::TooFewReplications { got: replications });
    }
    check_tagged(config, initial_state, tagged_class)?;

    let coupled_runs: Vec<CoupledRunResult> = (0..replications as u64)
        .into_par_iter()
        .map(|index| {
            let mut rng = rng::stream(seed, StreamDomain::CoupledRun, index);
            run_coupled_with(
                config,
                initial_state,
                tagged_class,
                DEFAULT_EPOCH_CAP,
                seed,
                &mut rng,
            )
        })
        .collect::<Result<_, _>>()?;

    let uncoupled_sojourns: Vec<f64> = (0..replications as u64)
        .into_par_iter()
        .map(|index| {
            let mut rng = rng::stream(seed, StreamDomain::ConditionalSojourn, index);
            conditional_sojourn_mps(config, initial_state, tagged_class, &mut rng)
                .map(|record| record.sojourn().expect("departed"))
        })
        .collect::<Result<_, _>>()
        .map_err(CouplingError::from)?;

    let uncoupled_waits: Vec<f64> = (0..replications as u64)
        .into_par_iter()
        .map(|index| {
            let mut rng = rng::stream(seed, StreamDomain::ConditionalWaiting, index);
            conditional_waiting_mros(config, initial_state, tagged_class, &mut rng)
                .map(|record| record.waiting().expect("started"))
        })
        .collect::<Result<_, _>>()
        .map_err(CouplingError::from)?;

    let coupled_sojourns: Vec<f64> = coupled_runs.iter().map(|r| r.tagged_sojourn).collect();
    let coupled_waits: Vec<f64> = coupled_runs.iter().map(|r| r.tagged_waiting).collect();
    let all_pairs_equal = coupled_runs
        .iter()
        .all(|r| r.tagged_sojourn == r.tagged_waiting);

    let sojourn_ks = two_sample_ks(
        &EmpiricalTail::from_samples(&coupled_sojourns)?,
        &EmpiricalTail::from_samples(&uncoupled_sojourns)?,
        alpha,
    )?;
    let waiting_ks = two_sample_ks(
        &EmpiricalTail::from_samples(&coupled_waits)?,
        &EmpiricalTail::from_samples(&uncoupled_waits)?,
        alpha,
    )?;

    Ok(ConditionalLawReport {
        replications,
        alpha,
        sojourn_ks,
        waiting_ks,
        all_pairs_equal,
        coupled_runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Cap;

    fn no_arrival_config(num_classes: usize) -> SystemConfig {
        // Arrival rates must be positive; 1e-12 makes an arrival before the
        // run ends astronomically unlikely.
        SystemConfig::new(
            vec![1e-12; num_classes],
            vec![1.0; num_classes],
            vec![Cap::Unbounded; num_classes],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn lone_tagged_pair_selected_at_first_epoch() {
        let config = no_arrival_config(1);
        for seed in 0..50 {
            let result = run_coupled(&config, &StateVector::zeros(1), 0, seed).unwrap();
            assert_eq!(result.completion_epochs, 1);
            assert!(result.tagged_sojourn > 0.0);
            assert_eq!(result.tagged_sojourn, result.tagged_waiting);
        }
    }

    #[test]
    fn tagged_times_are_bit_identical() {
        let config = SystemConfig::new(
            vec![0.2, 0.3],
            vec![1.0, 2.0],
            vec![Cap::Finite(2), Cap::Finite(3)],
            1.0,
        )
        .unwrap();
        let initial = StateVector::new(vec![2, 1]);
        for seed in 0..500u64 {
            let result = run_coupled(&config, &initial, (seed % 2) as usize, seed).unwrap();
            assert_eq!(result.tagged_sojourn, result.tagged_waiting);
            assert!(result.completion_epochs >= 1);
        }
    }

    #[test]
    fn selection_against_one_competitor_takes_one_or_two_epochs() {
        // One competitor pair with equal weights and no arrivals: the
        // tagged pair is picked at the first epoch with probability 1/2;
        // otherwise the competitor leaves and the tagged pair is picked at
        // the second epoch with probability 1. Enumerating the two paths:
        // P(1 epoch) = P(2 epochs) = 1/2, mean 1.5, standard deviation 0.5.
        let config = SystemConfig::new(
            vec![1e-12, 1e-12],
            vec![1.0, 1.0],
            vec![Cap::Unbounded, Cap::Unbounded],
            1.0,
        )
        .unwrap();
        let initial = StateVector::new(vec![1, 0]);
        let replications = 10_000u64;
        let mut total_epochs = 0u64;
        for index in 0..replications {
            let mut rng = rng::stream(7, StreamDomain::CoupledRun, index);
            let result =
                run_coupled_with(&config, &initial, 1, DEFAULT_EPOCH_CAP, 7, &mut rng)
                    .unwrap();
            assert!(
                result.completion_epochs == 1 || result.completion_epochs == 2,
                "impossible epoch count {}",
                result.completion_epochs
            );
            total_epochs += result.completion_epochs;
        }
        let mean = total_epochs as f64 / replications as f64;
        let standard_error = 0.5 / (replications as f64).sqrt();
        assert!(
            (mean - 1.5).abs() <= 3.0 * standard_error,
            "mean epochs {mean} outside 3 standard errors of 1.5"
        );
    }

    #[test]
    fn epoch_cap_is_an_error() {
        let config = no_arrival_config(1);
        let mut rng = rng::stream(3, StreamDomain::CoupledRun, 0);
        // Cap zero: the very first completion epoch trips the guard.
        let err = run_coupled_with(&config, &StateVector::new(vec![5]), 0, 0, 3, &mut rng)
            .unwrap_err();
        assert!(matches!(err, CouplingError::EpochCapExceeded { cap: 0 }));
    }

    #[test]
    fn single_replication_is_rejected() {
        let config = no_arrival_config(1);
        let err = conditional_law_check(&config, &StateVector::zeros(1), 0, 1, 0.01, 1)
            .unwrap_err();
        assert!(matches!(err, CouplingError::TooFewReplications { got: 1 }));
    }

    #[test]
    fn tagged_class_out_of_range_is_rejected() {
        let config = no_arrival_config(1);
        assert!(run_coupled(&config, &StateVector::zeros(1), 3, 1).is_err());
    }
}
