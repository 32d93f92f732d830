//! Quantum inverse iteration on a classical state-vector simulator.
//!
//! The numerical core is generic over the real scalar type (`f32` or `f64`).
//! The aliases at the crate root fix it to `f64`; the `*32` variants fix it
//! to `f32`.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boson;
pub mod error;
pub mod estimator;
pub mod noise;
pub mod operator;
pub mod pauli;
pub mod propagator;
pub mod protocol;
pub mod rng;
pub mod scalar;
pub mod series;
pub mod state;

pub use error::{Error, Result};
pub use estimator::{
    estimate_energy, estimate_observable, ideal_iterate, predicted_iterations, IterationReport, OverlapKind,
    OverlapProvider, SpectralGapInfo,
};
pub use noise::{NoiseConfig, NoisyEstimate};
pub use scalar::Real;
pub use series::{build_series, dedup_phases, suggest_grid};

pub type HermitianOperator = operator::HermitianOperator<f64>;
pub type StateVector = state::StateVector<f64>;
pub type PauliSum = pauli::PauliSum<f64>;
pub type PauliTerm = pauli::PauliTerm<f64>;
pub type BoseHubbardParams = boson::BoseHubbardParams<f64>;
pub type GridParams = series::GridParams<f64>;
pub type ExpansionSeries = series::ExpansionSeries<f64>;
pub type PhaseLedger = series::PhaseLedger<f64>;
pub type EvolutionBackend = propagator::EvolutionBackend<f64>;
pub type TrotterBackend = propagator::TrotterBackend<f64>;
pub type ExactOverlaps = estimator::ExactOverlaps<f64>;
pub type TabulatedOverlaps = estimator::TabulatedOverlaps<f64>;
pub type ProtocolOverlaps = protocol::ProtocolOverlaps<f64>;
pub type NoisyOverlaps = noise::NoisyOverlaps<f64>;

pub type HermitianOperator32 = operator::HermitianOperator<f32>;
pub type StateVector32 = state::StateVector<f32>;
pub type PauliSum32 = pauli::PauliSum<f32>;
pub type GridParams32 = series::GridParams<f32>;
pub type ExpansionSeries32 = series::ExpansionSeries<f32>;
pub type PhaseLedger32 = series::PhaseLedger<f32>;
pub type EvolutionBackend32 = propagator::EvolutionBackend<f32>;
pub type ExactOverlaps32 = estimator::ExactOverlaps<f32>;
