//! System parameters and the scheduling arithmetic shared by every other
//! module: eligible-customer counts, per-customer rate/selection shares, and
//! per-class selection weights.

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Per-class limit on how many customers are simultaneously eligible:
/// in service under MPS, candidates for selection under MROS.
///
/// Unbounded caps are explicit rather than a sentinel integer, so a
/// DPS/DROS configuration reads as what it is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cap {
    Finite(u32),
    Unbounded,
}

impl Cap {
    /// Number of eligible customers out of `n` present.
    pub fn clamp(self, n: u32) -> u32 {
        match self {
            Cap::Finite(limit) => n.min(limit),
            Cap::Unbounded => n,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Cap::Unbounded)
    }
}

// Caps appear in config files and result summaries as a number or the
// literal "inf".
impl Serialize for Cap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Cap::Finite(limit) => serializer.serialize_u32(*limit),
            Cap::Unbounded => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Cap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct CapVisitor;

        impl Visitor<'_> for CapVisitor {
            type Value = Cap;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a positive integer or the string \"inf\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Cap, E> {
                u32::try_from(v)
                    .map(Cap::Finite)
                    .map_err(|_| E::custom(format!("cap {v} exceeds u32 range")))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Cap, E> {
                if v < 0 {
                    return Err(E::custom(format!("cap must be non-negative, got {v}")));
                }
                self.visit_u64(v as u64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Cap, E> {
                if v == "inf" {
                    Ok(Cap::Unbounded)
                } else {
                    Err(E::custom(format!("expected \"inf\" or an integer, got {v:?}")))
                }
            }
        }

        deserializer.deserialize_any(CapVisitor)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unstable: Λ ≥ μ (Λ = {lambda_total}, μ = {mu})")]
    Unstable { lambda_total: f64, mu: f64 },
    #[error("at least one customer class is required")]
    NoClasses,
    #[error("arrival rates, weights and caps must have equal length, got {lambdas}/{weights}/{caps}")]
    ArityMismatch {
        lambdas: usize,
        weights: usize,
        caps: usize,
    },
    #[error("arrival_rates[{class}] must be positive and finite, got {value}")]
    BadArrivalRate { class: usize, value: f64 },
    #[error("weights[{class}] must be positive and finite, got {value}")]
    BadWeight { class: usize, value: f64 },
    #[error("service rate must be positive and finite, got {value}")]
    BadServiceRate { value: f64 },
    #[error("caps[{class}] must be at least 1")]
    ZeroCap { class: usize },
    #[error("class index {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },
    #[error("state length {got} does not match {expected} classes")]
    StateArityMismatch { got: usize, expected: usize },
    #[error("empty state: no customers present")]
    EmptyState,
    #[error("class {class} has no eligible customers in this state")]
    NoEligibleCustomer { class: usize },
}

/// Validated parameters of a multiclass single-server system.
///
/// Holds the per-class arrival rates `λ_i`, weights `p_i` and eligibility
/// caps `α_i` together with the service rate `μ`. Construction enforces
/// stability (`Λ = Σλ_i < μ`) and positivity of every rate and weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    arrival_rates: Vec<f64>,
    weights: Vec<f64>,
    caps: Vec<Cap>,
    service_rate: f64,
    total_arrival_rate: f64,
}

impl SystemConfig {
    pub fn new(
        arrival_rates: Vec<f64>,
        weights: Vec<f64>,
        caps: Vec<Cap>,
        service_rate: f64,
    ) -> Result<Self, ModelError> {
        if arrival_rates.is_empty() {
            return Err(ModelError::NoClasses);
        }
        if arrival_rates.len() != weights.len() || arrival_rates.len() != caps.len() {
            return Err(ModelError::ArityMismatch {
                lambdas: arrival_rates.len(),
                weights: weights.len(),
                caps: caps.len(),
            });
        }
        for (class, &rate) in arrival_rates.iter().enumerate() {
            if !rate.is_finite() || rate <= 0.0 {
                return Err(ModelError::BadArrivalRate { class, value: rate });
            }
        }
        for (class, &weight) in weights.iter().enumerate() {
            if !weight.is_finite() || weight <= 0.0 {
                return Err(ModelError::BadWeight { class, value: weight });
            }
        }
        for (class, &cap) in caps.iter().enumerate() {
            if cap == Cap::Finite(0) {
                return Err(ModelError::ZeroCap { class });
            }
        }
        if !service_rate.is_finite() || service_rate <= 0.0 {
            return Err(ModelError::BadServiceRate {
                value: service_rate,
            });
        }
        let total_arrival_rate: f64 = arrival_rates.iter().sum();
        if total_arrival_rate >= service_rate {
            return Err(ModelError::Unstable {
                lambda_total: total_arrival_rate,
                mu: service_rate,
            });
        }
        Ok(Self {
            arrival_rates,
            weights,
            caps,
            service_rate,
            total_arrival_rate,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.arrival_rates.len()
    }

    pub fn arrival_rates(&self) -> &[f64] {
        &self.arrival_rates
    }

    pub fn arrival_rate(&self, class: usize) -> f64 {
        self.arrival_rates[class]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, class: usize) -> f64 {
        self.weights[class]
    }

    pub fn caps(&self) -> &[Cap] {
        &self.caps
    }

    pub fn cap(&self, class: usize) -> Cap {
        self.caps[class]
    }

    pub fn service_rate(&self) -> f64 {
        self.service_rate
    }

    /// Λ = Σ λ_i.
    pub fn total_arrival_rate(&self) -> f64 {
        self.total_arrival_rate
    }

    /// Offered load ρ = Λ / μ, always in (0, 1).
    pub fn load(&self) -> f64 {
        self.total_arrival_rate / self.service_rate
    }

    /// Per-class load ρ_i = λ_i / μ.
    pub fn class_load(&self, class: usize) -> f64 {
        self.arrival_rates[class] / self.service_rate
    }

    fn check_state(&self, state: &StateVector) -> Result<(), ModelError> {
        if state.len() != self.num_classes() {
            return Err(ModelError::StateArityMismatch {
                got: state.len(),
                expected: self.num_classes(),
            });
        }
        Ok(())
    }

    /// Eligible-customer counts and their weighted total for `state`.
    pub fn service_profile(&self, state: &StateVector) -> ServiceProfile {
        debug_assert_eq!(state.len(), self.num_classes());
        let in_service: Vec<u32> = state
            .counts()
            .iter()
            .zip(&self.caps)
            .map(|(&n, cap)| cap.clamp(n))
            .collect();
        let weight_normalizer = in_service
            .iter()
            .zip(&self.weights)
            .map(|(&b, &p)| f64::from(b) * p)
            .sum();
        ServiceProfile {
            in_service,
            weight_normalizer,
        }
    }

    /// Share of the server owned by one eligible class-`class` customer:
    /// `p_i / Σ_j p_j β_j`. Under MPS this is the customer's service-rate
    /// fraction; under MROS it is the probability that this particular
    /// customer is the next one taken into service.
    pub fn per_customer_share(
        &self,
        class: usize,
        state: &StateVector,
    ) -> Result<f64, ModelError> {
        self.check_state(state)?;
        if class >= self.num_classes() {
            return Err(ModelError::ClassOutOfRange {
                class,
                num_classes: self.num_classes(),
            });
        }
        if state.is_empty() {
            return Err(ModelError::EmptyState);
        }
        let profile = self.service_profile(state);
        if profile.in_service[class] == 0 {
            return Err(ModelError::NoEligibleCustomer { class });
        }
        Ok(self.weights[class] / profile.weight_normalizer)
    }

    /// Probability that the next completion (MPS) or selection (MROS) is of
    /// class `class`: `w_i = p_i β_i / Σ_j p_j β_j`. Zero when the class has
    /// no eligible customers; the weights sum to one over classes.
    pub fn class_selection_weight(
        &self,
        class: usize,
        state: &StateVector,
    ) -> Result<f64, ModelError> {
        self.check_state(state)?;
        if class >= self.num_classes() {
            return Err(ModelError::ClassOutOfRange {
                class,
                num_classes: self.num_classes(),
            });
        }
        if state.is_empty() {
            return Err(ModelError::EmptyState);
        }
        let profile = self.service_profile(state);
        let eligible = profile.in_service[class];
        if eligible == 0 {
            return Ok(0.0);
        }
        // Written as β_i · (p_i / norm) so that the identity
        // weight == eligible-count × per-customer share holds bit-exactly.
        Ok(f64::from(eligible) * (self.weights[class] / profile.weight_normalizer))
    }

    /// All class-selection weights for `state` in one pass.
    pub fn selection_weights(&self, state: &StateVector) -> Result<Vec<f64>, ModelError> {
        self.check_state(state)?;
        if state.is_empty() {
            return Err(ModelError::EmptyState);
        }
        let profile = self.service_profile(state);
        Ok(profile
            .in_service
            .iter()
            .zip(&self.weights)
            .map(|(&b, &p)| f64::from(b) * (p / profile.weight_normalizer))
            .collect())
    }
}

/// Per-class customer counts `n̄ = (n_1, …, n_N)`.
///
/// For MPS this counts every customer in the system; for MROS it counts
/// waiting customers only (the one in service is tracked separately).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector {
    counts: Vec<u32>,
}

impl StateVector {
    pub fn new(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    pub fn zeros(num_classes: usize) -> Self {
        Self {
            counts: vec![0; num_classes],
        }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn count(&self, class: usize) -> u32 {
        self.counts[class]
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    /// Total number of customers n = Σ n_i.
    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&n| n == 0)
    }

    /// The state with one more class-`class` customer.
    pub fn with_arrival(&self, class: usize) -> StateVector {
        let mut counts = self.counts.clone();
        counts[class] += 1;
        StateVector { counts }
    }

    pub fn increment(&mut self, class: usize) {
        self.counts[class] += 1;
    }

    /// Removes one class-`class` customer; the class must be non-empty.
    pub fn decrement(&mut self, class: usize) {
        assert!(self.counts[class] > 0, "decrement of empty class {class}");
        self.counts[class] -= 1;
    }

    /// The state with one fewer class-`class` customer, or `None` if the
    /// class is empty.
    pub fn with_departure(&self, class: usize) -> Option<StateVector> {
        if self.counts[class] == 0 {
            return None;
        }
        let mut counts = self.counts.clone();
        counts[class] -= 1;
        Some(StateVector { counts })
    }
}

impl std::fmt::Display for StateVector {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        let mut first = true;
        for n in &self.counts {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
            first = false;
        }
        Ok(())
    }
}

/// Eligible-customer counts `β_i = min(n_i, α_i)` for a state, together with
/// the weighted total `Σ_j p_j β_j` every share formula divides by.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceProfile {
    in_service: Vec<u32>,
    weight_normalizer: f64,
}

impl ServiceProfile {
    pub fn in_service(&self) -> &[u32] {
        &self.in_service
    }

    pub fn in_service_count(&self, class: usize) -> u32 {
        self.in_service[class]
    }

    pub fn weight_normalizer(&self) -> f64 {
        self.weight_normalizer
    }
}
