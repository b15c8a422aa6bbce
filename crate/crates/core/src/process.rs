use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::channel::{choi_state, maximally_entangled_vector, pauli_basis, ChannelSpec};
use crate::error::{QuantumError, Result};
use crate::matrix::ComplexMatrix;
use crate::{NEGATIVE_EIGEN_TOL, PREDICATE_TOL};

/// Process matrix χ in the Pauli basis: `χ_ij = ⟨e_i|Choi|e_j⟩` with
/// `|e_i⟩ = (P_i ⊗ 𝟙)|Φ+⟩`. Always Hermitian, PSD and unit-trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessMatrix {
    n_qubits: usize,
    chi: ComplexMatrix,
}

impl ProcessMatrix {
    /// Validates the invariants: Hermitian within 1e-10, eigenvalues ≥ -1e-8,
    /// trace 1 within 1e-8.
    pub fn new(n_qubits: usize, chi: ComplexMatrix) -> Result<Self> {
        let dim = chi_dim(n_qubits)?;
        if chi.dim() != dim {
            return Err(QuantumError::DimensionMismatch {
                expected: dim,
                actual: chi.dim(),
            });
        }
        chi.validate_density(1e-8)?;
        Ok(Self { n_qubits, chi })
    }

    /// Wraps a matrix that is PSD and unit-trace by construction (analytic or
    /// maximum-likelihood output); only the dimension is checked.
    pub(crate) fn from_trusted(n_qubits: usize, chi: ComplexMatrix) -> Self {
        debug_assert_eq!(chi.dim(), 1 << (2 * n_qubits));
        Self { n_qubits, chi }
    }

    /// Projects an arbitrary matrix of the right size onto the nearest valid
    /// process matrix (Hermitize, clip eigenvalues, renormalize).
    pub fn project(n_qubits: usize, raw: &ComplexMatrix) -> Result<Self> {
        let dim = chi_dim(n_qubits)?;
        if raw.dim() != dim {
            return Err(QuantumError::DimensionMismatch {
                expected: dim,
                actual: raw.dim(),
            });
        }
        Ok(Self {
            n_qubits,
            chi: raw.project_to_density(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.chi.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.chi
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.chi
    }
}

fn chi_dim(n_qubits: usize) -> Result<usize> {
    match n_qubits {
        1 | 2 => Ok(1 << (2 * n_qubits)),
        n => Err(QuantumError::UnsupportedQubits(n)),
    }
}

/// Unitary whose columns are the Bell-transformed Pauli vectors `|e_i⟩`.
fn pauli_bell_basis(n_qubits: usize) -> Result<&'static ComplexMatrix> {
    static ONE: OnceLock<ComplexMatrix> = OnceLock::new();
    static TWO: OnceLock<ComplexMatrix> = OnceLock::new();
    let build = |n: usize| {
        let d = 1usize << n;
        let phi = maximally_entangled_vector(n).expect("supported size");
        let paulis = pauli_basis(n).expect("supported size");
        let ancilla = ComplexMatrix::identity(d);
        let mut basis = ComplexMatrix::zeros(d * d);
        for (col, p) in paulis.iter().enumerate() {
            let op = p.kron(&ancilla);
            for row in 0..d * d {
                basis[(row, col)] = (0..d * d).map(|k| op[(row, k)] * phi[k]).sum();
            }
        }
        basis
    };
    match n_qubits {
        1 => Ok(ONE.get_or_init(|| build(1))),
        2 => Ok(TWO.get_or_init(|| build(2))),
        n => Err(QuantumError::UnsupportedQubits(n)),
    }
}

/// Converts a Choi state into the process matrix χ.
pub fn chi_from_choi(rho: &ComplexMatrix, n_qubits: usize) -> Result<ProcessMatrix> {
    let dim = chi_dim(n_qubits)?;
    if rho.dim() != dim {
        return Err(QuantumError::DimensionMismatch {
            expected: dim,
            actual: rho.dim(),
        });
    }
    rho.validate_density(1e-8)?;
    let basis = pauli_bell_basis(n_qubits)?;
    let chi = &(&basis.adjoint() * rho) * basis;
    Ok(ProcessMatrix::from_trusted(n_qubits, chi.hermitian_part()))
}

/// Inverse of [`chi_from_choi`].
pub fn choi_from_chi(chi: &ProcessMatrix) -> ComplexMatrix {
    let basis = pauli_bell_basis(chi.n_qubits).expect("validated size");
    (&(basis * &chi.chi) * &basis.adjoint()).hermitian_part()
}

/// Analytic χ of a channel.
pub fn ideal_chi(spec: &ChannelSpec) -> Result<ProcessMatrix> {
    spec.validate()?;
    if let Some(probs) = spec.pauli_probabilities() {
        // Pauli-diagonal channels have χ = diag(p_i) exactly.
        return Ok(ProcessMatrix::from_trusted(1, ComplexMatrix::from_real_diagonal(&probs)));
    }
    let n = spec.n_qubits();
    let basis = pauli_bell_basis(n)?;
    let choi = choi_state(spec)?;
    let chi = &(&basis.adjoint() * &choi) * basis;
    Ok(ProcessMatrix::from_trusted(n, chi.hermitian_part()))
}

/// Uhlmann fidelity `(Tr √(√a b √a))²`.
pub fn fidelity(a: &ProcessMatrix, b: &ProcessMatrix) -> Result<f64> {
    FidelityReference::new(a)?.fidelity(b)
}

/// Fidelity against a fixed reference; caches `√a` so repeated comparisons
/// (grid searches) only pay one eigendecomposition each.
#[derive(Clone, Debug)]
pub struct FidelityReference {
    sqrt_ref: ComplexMatrix,
    reference: ComplexMatrix,
}

impl FidelityReference {
    pub fn new(reference: &ProcessMatrix) -> Result<Self> {
        Self::from_matrix(&reference.chi)
    }

    pub fn from_matrix(reference: &ComplexMatrix) -> Result<Self> {
        Ok(Self {
            sqrt_ref: reference.sqrt_psd()?,
            reference: reference.clone(),
        })
    }

    pub fn fidelity(&self, other: &ProcessMatrix) -> Result<f64> {
        self.fidelity_matrix(&other.chi)
    }

    pub fn fidelity_matrix(&self, other: &ComplexMatrix) -> Result<f64> {
        if other.dim() != self.sqrt_ref.dim() {
            return Err(QuantumError::DimensionMismatch {
                expected: self.sqrt_ref.dim(),
                actual: other.dim(),
            });
        }
        let inner = &(&self.sqrt_ref * other) * &self.sqrt_ref;
        let eig = inner.eigvalsh();
        if eig[0] < -NEGATIVE_EIGEN_TOL {
            return Err(QuantumError::NegativeEigenvalue(eig[0]));
        }
        let root_sum: f64 = eig.iter().map(|&l| l.max(0.0).sqrt()).sum();
        clip_fidelity(root_sum * root_sum)
    }

    /// Fidelity with the pure state `|ψ⟩⟨ψ|` (ψ normalized): `⟨ψ|a|ψ⟩`.
    pub fn fidelity_pure(&self, psi: &[C64]) -> Result<f64> {
        if psi.len() != self.reference.dim() {
            return Err(QuantumError::DimensionMismatch {
                expected: self.reference.dim(),
                actual: psi.len(),
            });
        }
        clip_fidelity(self.reference.sandwich(psi, psi).re)
    }
}

fn clip_fidelity(f: f64) -> Result<f64> {
    if !f.is_finite() || f > 1.0 + 1e-6 || f < -PREDICATE_TOL {
        return Err(QuantumError::InvalidDensityMatrix(format!(
            "fidelity {f} outside [0,1]; inputs are not unit-trace PSD"
        )));
    }
    Ok(f.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_density(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
        let g = ComplexMatrix::from_fn(dim, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let p = &g.adjoint() * &g;
        p.scale_real(1.0 / p.trace().re)
    }

    #[test]
    fn depolarizing_chi_is_diagonal() {
        let chi = ideal_chi(&ChannelSpec::Depolarizing { p: 0.6 }).unwrap();
        let expect = ComplexMatrix::from_real_diagonal(&[0.4, 0.2, 0.2, 0.2]);
        assert!(chi.matrix().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn identity_channel_chi_is_e00() {
        let chi = ideal_chi(&ChannelSpec::ControlledPhase { phi: 0.0 }).unwrap();
        let mut expect = ComplexMatrix::zeros(16);
        expect[(0, 0)] = C64::new(1.0, 0.0);
        assert!(chi.matrix().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn choi_chi_round_trip_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..100 {
            let n = 1 + i % 2;
            let rho = random_density(1 << (2 * n), &mut rng);
            let chi = chi_from_choi(&rho, n).unwrap();
            let back = choi_from_chi(&chi);
            assert!(back.max_abs_diff(&rho) < 1e-12);
        }
    }

    #[test]
    fn chi_from_choi_rejects_non_density() {
        let m = ComplexMatrix::identity(4);
        assert!(chi_from_choi(&m, 1).is_err());
        assert!(chi_from_choi(&ComplexMatrix::identity(2), 1).is_err());
    }

    #[test]
    fn fidelity_pure_bell_vs_mixed_is_quarter() {
        let a = ideal_chi(&ChannelSpec::Depolarizing { p: 0.0 }).unwrap();
        let b = ideal_chi(&ChannelSpec::Depolarizing { p: 0.75 }).unwrap();
        assert!((fidelity(&a, &b).unwrap() - 0.25).abs() < 1e-12);
        assert!((fidelity(&b, &a).unwrap() - 0.25).abs() < 1e-12);
        assert!((fidelity(&b, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_pure_shortcut_agrees() {
        let a = ideal_chi(&ChannelSpec::Depolarizing { p: 0.3 }).unwrap();
        let b = ideal_chi(&ChannelSpec::GeneralizedAmplitudeDamping { eta: 0.0, gamma: 0.5 })
            .unwrap();
        let psi: Vec<C64> = (0..4).map(|i| b.matrix()[(i, 0)]).collect();
        let r = FidelityReference::new(&a).unwrap();
        assert!((r.fidelity_pure(&psi).unwrap() - r.fidelity(&b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let a = ProcessMatrix::new(1, random_density(4, &mut rng)).unwrap();
            let b = ProcessMatrix::new(1, random_density(4, &mut rng)).unwrap();
            let (ab, ba) = (fidelity(&a, &b).unwrap(), fidelity(&b, &a).unwrap());
            assert!((ab - ba).abs() < 1e-9);
            assert!((0.0..=1.0).contains(&ab));
        }
    }

    #[test]
    fn fidelity_rejects_negative_matrix() {
        let bad = ComplexMatrix::from_real_diagonal(&[0.6, 0.5, 0.1, -0.2]);
        assert!(matches!(
            FidelityReference::from_matrix(&bad),
            Err(QuantumError::NegativeEigenvalue(_))
        ));
    }

    #[test]
    fn controlled_phase_fidelity_at_pi() {
        let a = ideal_chi(&ChannelSpec::ControlledPhase { phi: 0.0 }).unwrap();
        let b = ideal_chi(&ChannelSpec::ControlledPhase { phi: PI }).unwrap();
        // |Tr(U_0† U_π)/4|² = |(1+1+1-1)/4|² = 1/4
        assert!((fidelity(&a, &b).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn new_validates_invariants() {
        assert!(ProcessMatrix::new(1, ComplexMatrix::from_real_diagonal(&[0.5, 0.5, 0.1, -0.1]))
            .is_err());
        assert!(ProcessMatrix::new(1, ComplexMatrix::identity(2)).is_err());
        assert!(ProcessMatrix::new(3, ComplexMatrix::identity(64)).is_err());
    }
}
