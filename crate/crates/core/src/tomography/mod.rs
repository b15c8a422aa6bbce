//! Simulated ancilla-assisted process tomography.
//!
//! The Choi state of a channel is measured in every local Pauli setting
//! (9 settings for single-qubit channels, 81 for two-qubit channels), each
//! outcome count is drawn from an independent Poisson distribution whose mean
//! is the per-setting signal level times the Born probability, and the state is
//! reconstructed by maximizing the Poissonian likelihood over
//! `ρ = T†T / Tr(T†T)`.

mod counts;
mod mle;
mod pauli;
mod settings;
mod simulate;

pub use counts::{sample_counts, CountsTable};
pub use mle::{
    linear_inversion, log_likelihood, mle_reconstruct, mle_reconstruct_with, MleOptions,
    ReconstructionResult,
};
pub use settings::{enumerate_settings, outcome_probabilities, Basis, MeasurementSetting};
pub use simulate::{expected_counts, simulate_counts, simulate_noisy_chi, DEFAULT_N_BASE};
