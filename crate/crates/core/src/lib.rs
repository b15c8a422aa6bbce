//! Analytic ground truth for simulated quantum process tomography.
//!
//! The crate covers dense complex matrices with a Hermitian eigensolver,
//! the qubit channel families used throughout the workspace (depolarizing,
//! generalized amplitude damping, controlled phase and general Pauli
//! channels), Choi states and process matrices in the Pauli basis, the Uhlmann
//! fidelity, and a [`tomography`] module that samples Poissonian counts for
//! ancilla-assisted tomography and reconstructs physical process matrices by
//! maximum likelihood.

mod channel;
mod error;
mod matrix;
mod process;
pub mod seed;
pub mod tomography;

pub use channel::{
    apply_channel, choi_state, gad_kraus, maximally_entangled_state, pauli_basis, ChannelSpec,
};
pub use error::{QuantumError, Result};
pub use matrix::{ComplexMatrix, HermitianEigen};
pub use num_complex::Complex64 as C64;
pub use process::{chi_from_choi, choi_from_chi, fidelity, ideal_chi, FidelityReference, ProcessMatrix};

/// Tolerance used by the Hermitian/unitary/PSD predicates.
pub const PREDICATE_TOL: f64 = 1e-10;

/// Eigenvalues below `-NEGATIVE_EIGEN_TOL` make a matrix non-PSD for the purposes
/// of fidelity and process-matrix validation.
pub const NEGATIVE_EIGEN_TOL: f64 = 1e-8;
