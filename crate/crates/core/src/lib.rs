//! Multiclass processor-sharing (MPS) and multiclass random-order-service
//! (MROS) queues with per-class service-slot caps.
//!
//! Both policy families are driven by the same scheduling arithmetic: in a
//! state with `n_i` class-`i` customers, the first `min(n_i, alpha_i)` of
//! each class FIFO queue are eligible, and an eligible class-`i` customer
//! carries weight `p_i` relative to the other eligible customers. MPS serves
//! all eligible customers simultaneously at the corresponding rate fractions;
//! MROS serves one customer at a time and uses the same fractions as
//! selection probabilities.
//!
//! For Poisson arrivals and i.i.d. exponential services the two families are
//! tightly linked: the waiting-time tail under MROS equals `rho` times the
//! sojourn-time tail under MPS, class by class. This crate provides the
//! machinery to check that identity three independent ways:
//!
//! * [`engines`] — discrete-event simulators producing sojourn samples (MPS)
//!   and waiting samples (MROS), plus a slow residual-work reference engine.
//! * [`ctmc`] — truncated-chain solvers verifying the stationary-distribution
//!   relation behind the identity exactly.
//! * [`coupling`] — the joint construction that drives one MPS and one MROS
//!   system from shared randomness and makes the tagged times equal pathwise.
//! * [`stats`] — empirical tails, DKW bands, and the quantitative comparison.

pub mod coupling;
pub mod ctmc;
pub mod engines;
pub mod model;
pub mod rng;
pub mod stats;

pub use model::{Cap, ModelError, ServiceProfile, StateVector, SystemConfig};
