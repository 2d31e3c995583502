//! Discrete-event simulators for the two policy families.
//!
//! Three engines share the queue bookkeeping in this module:
//!
//! * [`simulate_mps`] — fast MPS engine on the embedded jump chain: under
//!   i.i.d. exponential services every eligible class-`i` customer completes
//!   at rate `μ·p_i/Σp_jβ_j`, so completions superpose to total rate `μ`
//!   with class split `w_i(n̄)` and a uniform pick inside the eligible
//!   prefix.
//! * [`reference::simulate_mps_reference`] — slow MPS engine that tracks
//!   each customer's remaining work and depletes it at the exact share rate
//!   between events. No memorylessness shortcut; used as an independent
//!   cross-check of the fast engine.
//! * [`simulate_mros`] — MROS engine: one customer in service, exponential
//!   service times, next customer drawn from the eligible prefixes with the
//!   class weights `w_i(n̄)`.
//!
//! All engines are deterministic functions of `(config, inputs, seed)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::model::{ModelError, StateVector, SystemConfig};
use crate::rng::{self, StreamDomain};

pub mod reference;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("at least one recorded event is required")]
    ZeroRunLength,
    #[error("warmup ({warmup}) must be smaller than the run length ({run_length})")]
    WarmupExceedsRun { warmup: u64, run_length: u64 },
}

/// Which engine produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Mps,
    MpsReference,
    Mros,
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        match self {
            Policy::Mps => write!(f, "mps"),
            Policy::MpsReference => write!(f, "mps-reference"),
            Policy::Mros => write!(f, "mros"),
        }
    }
}

/// One customer's timeline. Epochs are filled in as the simulation reaches
/// them; a waiting MROS customer has no service start yet, a customer still
/// in the system has no departure.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomerRecord {
    pub id: u64,
    pub class: usize,
    pub arrival_epoch: f64,
    pub service_start_epoch: Option<f64>,
    pub departure_epoch: Option<f64>,
}

impl CustomerRecord {
    pub(crate) fn new(id: u64, class: usize, arrival_epoch: f64) -> Self {
        Self {
            id,
            class,
            arrival_epoch,
            service_start_epoch: None,
            departure_epoch: None,
        }
    }

    /// Arrival-to-departure time; present once the customer has left.
    pub fn sojourn(&self) -> Option<f64> {
        self.departure_epoch.map(|d| d - self.arrival_epoch)
    }

    /// Arrival-to-service-start time; present once service has begun.
    pub fn waiting(&self) -> Option<f64> {
        self.service_start_epoch.map(|s| s - self.arrival_epoch)
    }
}

/// Point-in-time view of the queue structure, mostly for tests and
/// invariant checks.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueSnapshot {
    /// Customer ids per class in FIFO order.
    pub queues: Vec<Vec<u64>>,
    /// Id of the customer in service (MROS only).
    pub in_service: Option<u64>,
}

impl QueueSnapshot {
    pub fn counts(&self) -> StateVector {
        StateVector::new(self.queues.iter().map(|q| q.len() as u32).collect())
    }
}

/// Output of one engine run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub policy: Policy,
    pub seed: u64,
    /// Post-warmup sojourn times (MPS) or waiting times (MROS), per class.
    pub samples: Vec<Vec<f64>>,
    /// Customers generated by the arrival stream.
    pub arrivals: u64,
    /// Departures (MPS) or service starts (MROS) executed.
    pub completions: u64,
    /// Completions that produced no sample: warmup plus seeded initial
    /// customers.
    pub discarded: u64,
    /// Fraction of observed arrivals that found the server busy (MROS).
    pub busy_arrival_fraction: Option<f64>,
    pub final_clock: f64,
    /// Time-average distribution of the number of customers in the system
    /// over the post-warmup window; index = customer count.
    pub total_count_occupancy: Vec<f64>,
}

impl SimulationResult {
    pub fn recorded(&self) -> u64 {
        self.completions - self.discarded
    }

    /// Time-average number of customers in the system.
    pub fn mean_number_in_system(&self) -> f64 {
        self.total_count_occupancy
            .iter()
            .enumerate()
            .map(|(n, &p)| n as f64 * p)
            .sum()
    }

    /// Every `stride`-th sample per class, thinning serial correlation for
    /// the confidence machinery in [`crate::stats`].
    pub fn subsampled(&self, stride: usize) -> Vec<Vec<f64>> {
        assert!(stride > 0, "stride must be positive");
        self.samples
            .iter()
            .map(|class_samples| class_samples.iter().copied().step_by(stride).collect())
            .collect()
    }

    /// All classes pooled.
    pub fn pooled_samples(&self) -> Vec<f64> {
        self.samples.iter().flatten().copied().collect()
    }
}

/// Draws a class index with probability proportional to `rates`.
pub(crate) fn sample_class_by_rate<R: Rng>(rng: &mut R, rates: &[f64], total: f64) -> usize {
    let mut target = rng.random::<f64>() * total;
    for (class, &rate) in rates.iter().enumerate() {
        target -= rate;
        if target < 0.0 {
            return class;
        }
    }
    // Floating-point leftovers land on the last class with positive rate.
    rates
        .iter()
        .rposition(|&r| r > 0.0)
        .expect("at least one positive rate")
}

/// Draws the class of the next completion with the selection weights
/// `w_i(n̄)`, then a uniform position within the eligible prefix.
pub(crate) fn sample_completion<R: Rng>(
    rng: &mut R,
    config: &SystemConfig,
    counts: &StateVector,
) -> (usize, usize) {
    let profile = config.service_profile(counts);
    let weighted: Vec<f64> = profile
        .in_service()
        .iter()
        .zip(config.weights())
        .map(|(&b, &p)| f64::from(b) * p)
        .collect();
    let class = sample_class_by_rate(rng, &weighted, profile.weight_normalizer());
    let eligible = profile.in_service_count(class) as usize;
    debug_assert!(eligible > 0);
    let position = rng.random_range(0..eligible);
    (class, position)
}

/// Inverse-transform exponential: one uniform per gap.
pub(crate) fn exponential<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

/// Per-class FIFO queues of an MPS system. The first `β_i` customers of
/// each queue are in service; a departure inside that prefix promotes the
/// oldest waiting class member.
#[derive(Debug)]
pub struct MpsSystem {
    queues: Vec<std::collections::VecDeque<CustomerRecord>>,
    counts: StateVector,
}

impl MpsSystem {
    pub fn new(num_classes: usize) -> Self {
        Self {
            queues: (0..num_classes)
                .map(|_| std::collections::VecDeque::new())
                .collect(),
            counts: StateVector::zeros(num_classes),
        }
    }

    pub fn counts(&self) -> &StateVector {
        &self.counts
    }

    pub fn total(&self) -> u32 {
        self.counts.total()
    }

    /// Appends a customer to its class queue, starting service immediately
    /// when the queue position falls inside the cap.
    pub fn admit(&mut self, mut record: CustomerRecord, config: &SystemConfig) {
        let class = record.class;
        let position = self.queues[class].len() as u32;
        if config.cap(class).clamp(position + 1) > position {
            record.service_start_epoch = Some(record.arrival_epoch);
        }
        self.queues[class].push_back(record);
        self.counts.increment(class);
    }

    /// Removes the customer at `position` in class `class` (which must lie
    /// inside the eligible prefix) and stamps its departure epoch. The
    /// customer promoted into the freed service slot, if any, gets its
    /// service start stamped.
    pub fn remove(
        &mut self,
        class: usize,
        position: usize,
        now: f64,
        config: &SystemConfig,
    ) -> CustomerRecord {
        let before = self.queues[class].len() as u32;
        debug_assert!((position as u32) < config.cap(class).clamp(before));
        let mut record = self.queues[class]
            .remove(position)
            .expect("position in range");
        record.departure_epoch = Some(now);
        self.counts.decrement(class);
        if let crate::model::Cap::Finite(limit) = config.cap(class) {
            if before > limit {
                let promoted = &mut self.queues[class][limit as usize - 1];
                debug_assert!(promoted.service_start_epoch.is_none());
                promoted.service_start_epoch = Some(now);
            }
        }
        record
    }

    pub fn snapshot(&self) -> QueueSnapshot {
        QueueSnapshot {
            queues: self
                .queues
                .iter()
                .map(|q| q.iter().map(|c| c.id).collect())
                .collect(),
            in_service: None,
        }
    }
}

/// Waiting queues plus the single service position of an MROS system.
#[derive(Debug)]
pub struct MrosSystem {
    waiting: Vec<std::collections::VecDeque<CustomerRecord>>,
    in_service: Option<CustomerRecord>,
    counts: StateVector,
}

impl MrosSystem {
    pub fn new(num_classes: usize) -> Self {
        Self {
            waiting: (0..num_classes)
                .map(|_| std::collections::VecDeque::new())
                .collect(),
            in_service: None,
            counts: StateVector::zeros(num_classes),
        }
    }

    /// Waiting customers only; excludes the one in service.
    pub fn waiting_counts(&self) -> &StateVector {
        &self.counts
    }

    pub fn is_busy(&self) -> bool {
        self.in_service.is_some()
    }

    pub fn admit_waiting(&mut self, record: CustomerRecord) {
        let class = record.class;
        self.waiting[class].push_back(record);
        self.counts.increment(class);
    }

    /// Puts an arrival straight into service on an idle server.
    pub fn admit_to_idle(&mut self, mut record: CustomerRecord) {
        assert!(self.in_service.is_none(), "server already busy");
        record.service_start_epoch = Some(record.arrival_epoch);
        self.in_service = Some(record);
    }

    /// Installs a customer directly in the service position (epoch-zero
    /// occupants of a busy server).
    pub(crate) fn set_occupant(&mut self, mut record: CustomerRecord) {
        assert!(self.in_service.is_none(), "server already busy");
        record.service_start_epoch = Some(record.arrival_epoch);
        self.in_service = Some(record);
    }

    /// Moves the waiting customer at `position` of class `class` into
    /// service; the server must be free at that instant.
    pub fn start_service(&mut self, class: usize, position: usize, now: f64) -> &CustomerRecord {
        assert!(self.in_service.is_none(), "server already busy");
        let mut record = self.waiting[class]
            .remove(position)
            .expect("position in range");
        record.service_start_epoch = Some(now);
        self.counts.decrement(class);
        self.in_service = Some(record);
        self.in_service.as_ref().expect("just set")
    }

    /// Completes the in-service customer.
    pub fn complete(&mut self, now: f64) -> CustomerRecord {
        let mut record = self.in_service.take().expect("completion on idle server");
        record.departure_epoch = Some(now);
        record
    }

    pub fn snapshot(&self) -> QueueSnapshot {
        QueueSnapshot {
            queues: self
                .waiting
                .iter()
                .map(|q| q.iter().map(|c| c.id).collect())
                .collect(),
            in_service: self.in_service.as_ref().map(|c| c.id),
        }
    }
}

fn check_run(
    config: &SystemConfig,
    initial_state: &StateVector,
    run_length: u64,
    warmup: u64,
) -> Result<(), EngineError> {
    if initial_state.len() != config.num_classes() {
        return Err(ModelError::StateArityMismatch {
            got: initial_state.len(),
            expected: config.num_classes(),
        }
        .into());
    }
    if run_length == 0 {
        return Err(EngineError::ZeroRunLength);
    }
    if warmup >= run_length {
        return Err(EngineError::WarmupExceedsRun { warmup, run_length });
    }
    Ok(())
}

pub(crate) fn check_tagged(
    config: &SystemConfig,
    initial_state: &StateVector,
    tagged_class: usize,
) -> Result<(), EngineError> {
    if initial_state.len() != config.num_classes() {
        return Err(ModelError::StateArityMismatch {
            got: initial_state.len(),
            expected: config.num_classes(),
        }
        .into());
    }
    if tagged_class >= config.num_classes() {
        return Err(ModelError::ClassOutOfRange {
            class: tagged_class,
            num_classes: config.num_classes(),
        }
        .into());
    }
    Ok(())
}

/// Seeds `system` with the initial customers, in class order then FIFO
/// position, all arriving at epoch zero. Returns the number seeded.
fn seed_mps(system: &mut MpsSystem, initial_state: &StateVector, config: &SystemConfig) -> u64 {
    let mut id = 0;
    for class in 0..initial_state.len() {
        for _ in 0..initial_state.count(class) {
            system.admit(CustomerRecord::new(id, class, 0.0), config);
            id += 1;
        }
    }
    id
}

/// Seeds the MROS system: waiting customers in class order plus a synthetic
/// occupant of the service position when any are waiting. Returns the first
/// live id.
fn seed_mros(system: &mut MrosSystem, initial_state: &StateVector) -> u64 {
    if initial_state.is_empty() {
        return 0;
    }
    system.set_occupant(CustomerRecord::new(0, 0, 0.0));
    let mut id = 1;
    for class in 0..initial_state.len() {
        for _ in 0..initial_state.count(class) {
            system.admit_waiting(CustomerRecord::new(id, class, 0.0));
            id += 1;
        }
    }
    id
}

struct OccupancyTracker {
    weights: Vec<f64>,
    active: bool,
    total_time: f64,
}

impl OccupancyTracker {
    fn new(active: bool) -> Self {
        Self {
            weights: Vec::new(),
            active,
            total_time: 0.0,
        }
    }

    fn observe(&mut self, count: u32, dt: f64) {
        if !self.active {
            return;
        }
        let index = count as usize;
        if index >= self.weights.len() {
            self.weights.resize(index + 1, 0.0);
        }
        self.weights[index] += dt;
        self.total_time += dt;
    }

    fn distribution(self) -> Vec<f64> {
        if self.total_time == 0.0 {
            return Vec::new();
        }
        self.weights
            .into_iter()
            .map(|w| w / self.total_time)
            .collect()
    }
}

/// Runs the MPS(ᾱ) engine until `num_departures` departures have happened;
/// sojourn times are recorded after the first `warmup_departures` of them.
/// Customers seeded by `initial_state` exist at epoch zero and never
/// contribute samples.
pub fn simulate_mps(
    config: &SystemConfig,
    initial_state: &StateVector,
    num_departures: u64,
    warmup_departures: u64,
    seed: u64,
) -> Result<SimulationResult, EngineError> {
    check_run(config, initial_state, num_departures, warmup_departures)?;
    let mut rng = rng::stream(seed, StreamDomain::MpsEngine, 0);
    let total_rate = config.total_arrival_rate() + config.service_rate();
    let arrival_probability = config.total_arrival_rate() / total_rate;

    let mut system = MpsSystem::new(config.num_classes());
    let seeded = seed_mps(&mut system, initial_state, config);

    let mut clock = 0.0;
    let mut next_id = seeded;
    let mut arrivals = 0u64;
    let mut departures = 0u64;
    let mut discarded = 0u64;
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); config.num_classes()];
    let mut occupancy = OccupancyTracker::new(warmup_departures == 0);

    while departures < num_departures {
        let count_before = system.total();
        let dt;
        let is_arrival;
        if count_before == 0 {
            dt = exponential(&mut rng, config.total_arrival_rate());
            is_arrival = true;
        } else {
            dt = exponential(&mut rng, total_rate);
            is_arrival = rng.random::<f64>() < arrival_probability;
        }
        occupancy.observe(count_before, dt);
        clock += dt;

        if is_arrival {
            let class = sample_class_by_rate(
                &mut rng,
                config.arrival_rates(),
                config.total_arrival_rate(),
            );
            system.admit(CustomerRecord::new(next_id, class, clock), config);
            next_id += 1;
            arrivals += 1;
        } else {
            let (class, position) = sample_completion(&mut rng, config, system.counts());
            let record = system.remove(class, position, clock, config);
            departures += 1;
            if departures > warmup_departures && record.id >= seeded {
                samples[class].push(clock - record.arrival_epoch);
            } else {
                discarded += 1;
            }
            if departures == warmup_departures {
                occupancy.active = true;
            }
        }
    }

    Ok(SimulationResult {
        policy: Policy::Mps,
        seed,
        samples,
        arrivals,
        completions: departures,
        discarded,
        busy_arrival_fraction: None,
        final_clock: clock,
        total_count_occupancy: occupancy.distribution(),
    })
}

/// Runs the MROS(ᾱ) engine until `num_service_starts` customers have begun
/// service; waiting times are recorded after the first `warmup` of them.
///
/// A non-empty `initial_state` describes waiting customers, which requires
/// a busy server: an extra unsampled customer occupies the service position
/// at epoch zero.
pub fn simulate_mros(
    config: &SystemConfig,
    initial_state: &StateVector,
    num_service_starts: u64,
    warmup_service_starts: u64,
    seed: u64,
) -> Result<SimulationResult, EngineError> {
    check_run(config, initial_state, num_service_starts, warmup_service_starts)?;
    let mut rng = rng::stream(seed, StreamDomain::MrosEngine, 0);
    let total_rate = config.total_arrival_rate() + config.service_rate();
    let arrival_probability = config.total_arrival_rate() / total_rate;

    let mut system = MrosSystem::new(config.num_classes());
    let seeded = seed_mros(&mut system, initial_state);

    let mut clock = 0.0;
    let mut next_id = seeded;
    let mut arrivals = 0u64;
    let mut service_starts = 0u64;
    let mut discarded = 0u64;
    let mut observed_arrivals = 0u64;
    let mut observed_busy = 0u64;
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); config.num_classes()];
    let mut occupancy = OccupancyTracker::new(warmup_service_starts == 0);

    while service_starts < num_service_starts {
        let in_system = system.waiting_counts().total() + u32::from(system.is_busy());
        let dt;
        let is_arrival;
        if system.is_busy() {
            dt = exponential(&mut rng, total_rate);
            is_arrival = rng.random::<f64>() < arrival_probability;
        } else {
            dt = exponential(&mut rng, config.total_arrival_rate());
            is_arrival = true;
        }
        occupancy.observe(in_system, dt);
        clock += dt;

        if is_arrival {
            let class = sample_class_by_rate(
                &mut rng,
                config.arrival_rates(),
                config.total_arrival_rate(),
            );
            let record = CustomerRecord::new(next_id, class, clock);
            next_id += 1;
            arrivals += 1;
            if service_starts >= warmup_service_starts {
                observed_arrivals += 1;
                if system.is_busy() {
                    observed_busy += 1;
                }
            }
            if system.is_busy() {
                system.admit_waiting(record);
            } else {
                let id = record.id;
                system.admit_to_idle(record);
                service_starts += 1;
                if service_starts > warmup_service_starts && id >= seeded {
                    samples[class].push(0.0);
                } else {
                    discarded += 1;
                }
                if service_starts == warmup_service_starts {
                    occupancy.active = true;
                }
            }
        } else {
            system.complete(clock);
            if !system.waiting_counts().is_empty() {
                let (class, position) =
                    sample_completion(&mut rng, config, system.waiting_counts());
                let started = system.start_service(class, position, clock).clone();
                service_starts += 1;
                if service_starts > warmup_service_starts && started.id >= seeded {
                    samples[class].push(started.waiting().expect("just stamped"));
                } else {
                    discarded += 1;
                }
                if service_starts == warmup_service_starts {
                    occupancy.active = true;
                }
            }
        }
    }

    Ok(SimulationResult {
        policy: Policy::Mros,
        seed,
        samples,
        arrivals,
        completions: service_starts,
        discarded,
        busy_arrival_fraction: if observed_arrivals > 0 {
            Some(observed_busy as f64 / observed_arrivals as f64)
        } else {
            None
        },
        final_clock: clock,
        total_count_occupancy: occupancy.distribution(),
    })
}

/// Sojourn of a tagged class-`tagged_class` customer arriving at epoch zero
/// to an MPS system already holding `initial_state` customers.
pub fn conditional_sojourn_mps(
    config: &SystemConfig,
    initial_state: &StateVector,
    tagged_class: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CustomerRecord, EngineError> {
    check_tagged(config, initial_state, tagged_class)?;
    let total_rate = config.total_arrival_rate() + config.service_rate();
    let arrival_probability = config.total_arrival_rate() / total_rate;

    let mut system = MpsSystem::new(config.num_classes());
    let tagged_id = seed_mps(&mut system, initial_state, config);
    system.admit(CustomerRecord::new(tagged_id, tagged_class, 0.0), config);

    let mut clock = 0.0;
    let mut next_id = tagged_id + 1;
    loop {
        // The tagged customer keeps the system non-empty until it leaves.
        clock += exponential(rng, total_rate);
        if rng.random::<f64>() < arrival_probability {
            let class = sample_class_by_rate(
                rng,
                config.arrival_rates(),
                config.total_arrival_rate(),
            );
            system.admit(CustomerRecord::new(next_id, class, clock), config);
            next_id += 1;
        } else {
            let (class, position) = sample_completion(rng, config, system.counts());
            let record = system.remove(class, position, clock, config);
            if record.id == tagged_id {
                return Ok(record);
            }
        }
    }
}

/// Waiting time of a tagged class-`tagged_class` customer arriving at epoch
/// zero to an MROS system with `initial_state` waiting customers and a busy
/// server (whose residual service is a fresh exponential, by
/// memorylessness).
pub fn conditional_waiting_mros(
    config: &SystemConfig,
    initial_state: &StateVector,
    tagged_class: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CustomerRecord, EngineError> {
    check_tagged(config, initial_state, tagged_class)?;
    let total_rate = config.total_arrival_rate() + config.service_rate();
    let arrival_probability = config.total_arrival_rate() / total_rate;

    let mut system = MrosSystem::new(config.num_classes());
    system.set_occupant(CustomerRecord::new(0, 0, 0.0));
    let mut next_id = 1;
    for class in 0..initial_state.len() {
        for _ in 0..initial_state.count(class) {
            system.admit_waiting(CustomerRecord::new(next_id, class, 0.0));
            next_id += 1;
        }
    }
    let tagged_id = next_id;
    system.admit_waiting(CustomerRecord::new(tagged_id, tagged_class, 0.0));
    next_id += 1;

    let mut clock = 0.0;
    loop {
        // The server stays busy while the tagged customer waits: every
        // completion immediately pulls in a waiting customer.
        clock += exponential(rng, total_rate);
        if rng.random::<f64>() < arrival_probability {
            let class = sample_class_by_rate(
                rng,
                config.arrival_rates(),
                config.total_arrival_rate(),
            );
            system.admit_waiting(CustomerRecord::new(next_id, class, clock));
            next_id += 1;
        } else {
            system.complete(clock);
            let (class, position) = sample_completion(rng, config, system.waiting_counts());
            let started = system.start_service(class, position, clock);
            if started.id == tagged_id {
                return Ok(started.clone());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Cap;

    fn single_class(lambda: f64) -> SystemConfig {
        SystemConfig::new(vec![lambda], vec![1.0], vec![Cap::Unbounded], 1.0).unwrap()
    }

    #[test]
    fn first_customer_departs_with_positive_sojourn() {
        let config = single_class(0.5);
        let result = simulate_mps(&config, &StateVector::zeros(1), 1, 0, 7).unwrap();
        assert_eq!(result.completions, 1);
        assert_eq!(result.samples[0].len(), 1);
        assert!(result.samples[0][0] > 0.0);
    }

    #[test]
    fn run_length_validation() {
        let config = single_class(0.5);
        assert!(matches!(
            simulate_mps(&config, &StateVector::zeros(1), 0, 0, 1),
            Err(EngineError::ZeroRunLength)
        ));
        assert!(matches!(
            simulate_mps(&config, &StateVector::zeros(1), 5, 5, 1),
            Err(EngineError::WarmupExceedsRun { .. })
        ));
        assert!(matches!(
            simulate_mps(&config, &StateVector::zeros(2), 5, 0, 1),
            Err(EngineError::Model(ModelError::StateArityMismatch { .. }))
        ));
    }

    #[test]
    fn seeded_customers_never_contribute_samples() {
        let config = single_class(0.5);
        let result = simulate_mps(&config, &StateVector::new(vec![3]), 3, 0, 11).unwrap();
        assert_eq!(result.completions, 3);
        assert_eq!(
            result.discarded + result.samples[0].len() as u64,
            result.completions
        );
    }

    #[test]
    fn arrival_to_empty_mros_waits_zero() {
        let config = single_class(0.5);
        let result = simulate_mros(&config, &StateVector::zeros(1), 1, 0, 3).unwrap();
        assert_eq!(result.samples[0], vec![0.0]);
    }

    #[test]
    fn mros_waiting_vector_excludes_in_service_customer() {
        let mut system = MrosSystem::new(1);
        let seeded = seed_mros(&mut system, &StateVector::new(vec![2]));
        assert_eq!(seeded, 3);
        assert!(system.is_busy());
        assert_eq!(system.waiting_counts().total(), 2);
        let snap = system.snapshot();
        assert_eq!(snap.in_service, Some(0));
        assert_eq!(snap.queues[0], vec![1, 2]);
    }

    #[test]
    fn mps_promotion_stamps_service_start() {
        let config =
            SystemConfig::new(vec![0.5], vec![1.0], vec![Cap::Finite(2)], 1.0).unwrap();
        let mut system = MpsSystem::new(1);
        for id in 0..4 {
            system.admit(CustomerRecord::new(id, 0, id as f64), &config);
        }
        // Positions 0 and 1 in service, 2 and 3 waiting.
        assert_eq!(system.queues[0][0].service_start_epoch, Some(0.0));
        assert_eq!(system.queues[0][1].service_start_epoch, Some(1.0));
        assert_eq!(system.queues[0][2].service_start_epoch, None);
        assert_eq!(system.queues[0][3].service_start_epoch, None);

        let gone = system.remove(0, 1, 10.0, &config);
        assert_eq!(gone.departure_epoch, Some(10.0));
        // The oldest waiting customer (id 2) moved into the freed slot.
        assert_eq!(system.queues[0][1].id, 2);
        assert_eq!(system.queues[0][1].service_start_epoch, Some(10.0));
        assert_eq!(system.queues[0][2].service_start_epoch, None);
    }

    #[test]
    fn identical_seeds_reproduce_identical_results() {
        let config = SystemConfig::new(
            vec![0.2, 0.3],
            vec![1.0, 2.0],
            vec![Cap::Finite(2), Cap::Finite(3)],
            1.0,
        )
        .unwrap();
        let initial = StateVector::new(vec![1, 2]);
        let a = simulate_mps(&config, &initial, 500, 50, 99).unwrap();
        let b = simulate_mps(&config, &initial, 500, 50, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate_mros(&config, &initial, 500, 50, 99).unwrap();
        let d = simulate_mros(&config, &initial, 500, 50, 99).unwrap();
        assert_eq!(c, d);
        let e = simulate_mps(&config, &initial, 500, 50, 100).unwrap();
        assert_ne!(a, e);
    }

    #[test]
    fn conditional_records_satisfy_epoch_ordering() {
        let config = SystemConfig::new(
            vec![0.2, 0.3],
            vec![1.0, 2.0],
            vec![Cap::Finite(1), Cap::Finite(1)],
            1.0,
        )
        .unwrap();
        let initial = StateVector::new(vec![2, 1]);
        let mut rng = rng::stream(5, StreamDomain::ConditionalSojourn, 0);
        for _ in 0..50 {
            let record = conditional_sojourn_mps(&config, &initial, 0, &mut rng).unwrap();
            let start = record.service_start_epoch.unwrap();
            let end = record.departure_epoch.unwrap();
            assert!(record.arrival_epoch <= start && start <= end);
            assert!(record.sojourn().unwrap() > 0.0);
        }
        let mut rng = rng::stream(5, StreamDomain::ConditionalWaiting, 0);
        for _ in 0..50 {
            let record = conditional_waiting_mros(&config, &initial, 1, &mut rng).unwrap();
            assert!(record.waiting().unwrap() > 0.0);
            assert!(record.departure_epoch.is_none());
        }
    }

    #[test]
    fn subsampling_takes_every_kth() {
        let result = SimulationResult {
            policy: Policy::Mps,
            seed: 0,
            samples: vec![(0..10).map(f64::from).collect()],
            arrivals: 10,
            completions: 10,
            discarded: 0,
            busy_arrival_fraction: None,
            final_clock: 1.0,
            total_count_occupancy: vec![],
        };
        assert_eq!(result.subsampled(4)[0], vec![0.0, 4.0, 8.0]);
        assert_eq!(result.recorded(), 10);
    }
}
