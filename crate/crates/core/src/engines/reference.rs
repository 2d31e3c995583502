//! Per-clock MPS engine used as an independent oracle for the embedded-jump
//! engine.
//!
//! Every customer owns a remaining-work quantity drawn once at arrival;
//! between events the first `β_i` customers of each class deplete their work
//! at exactly the share rate `p_i/Σp_jβ_j`, and the next departure is
//! whoever runs out first. Nothing here relies on memorylessness, which is
//! the point: agreement with [`super::simulate_mps`] checks the embedded
//! superposition argument rather than assuming it.

use std::collections::VecDeque;

use rand::Rng;

use crate::model::{StateVector, SystemConfig};
use crate::rng::{self, StreamDomain};

use super::{
    check_run, exponential, sample_class_by_rate, EngineError, OccupancyTracker, Policy,
    SimulationResult,
};

#[derive(Debug)]
struct WorkCustomer {
    id: u64,
    arrival_epoch: f64,
    remaining_work: f64,
}

/// Same contract as [`super::simulate_mps`], computed by explicit
/// residual-work bookkeeping.
pub fn simulate_mps_reference(
    config: &SystemConfig,
    initial_state: &StateVector,
    num_departures: u64,
    warmup_departures: u64,
    seed: u64,
) -> Result<SimulationResult, EngineError> {
    check_run(config, initial_state, num_departures, warmup_departures)?;
    let mut rng = rng::stream(seed, StreamDomain::MpsReferenceEngine, 0);
    let service_rate = config.service_rate();

    let mut queues: Vec<VecDeque<WorkCustomer>> =
        (0..config.num_classes()).map(|_| VecDeque::new()).collect();
    let mut counts = StateVector::zeros(config.num_classes());
    let mut next_id = 0u64;
    for class in 0..initial_state.len() {
        for _ in 0..initial_state.count(class) {
            queues[class].push_back(WorkCustomer {
                id: next_id,
                arrival_epoch: 0.0,
                remaining_work: exponential(&mut rng, service_rate),
            });
            counts.increment(class);
            next_id += 1;
        }
    }
    let seeded = next_id;

    let mut clock = 0.0;
    let mut next_arrival = exponential(&mut rng, config.total_arrival_rate());
    let mut arrivals = 0u64;
    let mut departures = 0u64;
    let mut discarded = 0u64;
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); config.num_classes()];
    let mut occupancy = OccupancyTracker::new(warmup_departures == 0);

    while departures < num_departures {
        let total = counts.total();
        if total == 0 {
            occupancy.observe(0, next_arrival - clock);
            clock = next_arrival;
            admit_arrival(config, &mut rng, &mut queues, &mut counts, clock, &mut next_id);
            arrivals += 1;
            next_arrival = clock + exponential(&mut rng, config.total_arrival_rate());
            continue;
        }

        let profile = config.service_profile(&counts);
        // Within a class every in-service customer depletes at the same
        // rate, so the class candidate is the prefix minimum.
        let mut depart_in = f64::INFINITY;
        let mut depart_class = 0;
        let mut depart_position = 0;
        let mut shares = vec![0.0; config.num_classes()];
        for class in 0..config.num_classes() {
            let in_service = profile.in_service_count(class) as usize;
            if in_service == 0 {
                continue;
            }
            let share = config.weight(class) / profile.weight_normalizer();
            shares[class] = share;
            for position in 0..in_service {
                let time_left = queues[class][position].remaining_work / share;
                if time_left < depart_in {
                    depart_in = time_left;
                    depart_class = class;
                    depart_position = position;
                }
            }
        }

        let until_arrival = next_arrival - clock;
        let dt = depart_in.min(until_arrival);
        for class in 0..config.num_classes() {
            let in_service = profile.in_service_count(class) as usize;
            for position in 0..in_service {
                let customer = &mut queues[class][position];
                customer.remaining_work =
                    (customer.remaining_work - dt * shares[class]).max(0.0);
            }
        }
        occupancy.observe(total, dt);
        clock += dt;

        if depart_in <= until_arrival {
            let record = queues[depart_class]
                .remove(depart_position)
                .expect("departing customer present");
            counts.decrement(depart_class);
            departures += 1;
            if departures > warmup_departures && record.id >= seeded {
                samples[depart_class].push(clock - record.arrival_epoch);
            } else {
                discarded += 1;
            }
            if departures == warmup_departures {
                occupancy.active = true;
            }
        } else {
            admit_arrival(config, &mut rng, &mut queues, &mut counts, clock, &mut next_id);
            arrivals += 1;
            next_arrival = clock + exponential(&mut rng, config.total_arrival_rate());
        }
    }

    Ok(SimulationResult {
        policy: Policy::MpsReference,
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

fn admit_arrival<R: Rng>(
    config: &SystemConfig,
    rng: &mut R,
    queues: &mut [VecDeque<WorkCustomer>],
    counts: &mut StateVector,
    clock: f64,
    next_id: &mut u64,
) {
    let class = sample_class_by_rate(rng, config.arrival_rates(), config.total_arrival_rate());
    queues[class].push_back(WorkCustomer {
        id: *next_id,
        arrival_epoch: clock,
        remaining_work: exponential(rng, config.service_rate()),
    });
    counts.increment(class);
    *next_id += 1;
}
