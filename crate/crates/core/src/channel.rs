use std::f64::consts::TAU;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{QuantumError, Result};
use crate::matrix::ComplexMatrix;

/// A parameterized channel; the ground truth behind every simulated record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ChannelSpec {
    /// Depolarizing channel with Pauli weights `(1-p, p/3, p/3, p/3)`.
    Depolarizing { p: f64 },
    /// Generalized amplitude damping.
    GeneralizedAmplitudeDamping { eta: f64, gamma: f64 },
    /// Two-qubit controlled phase `diag(1, 1, 1, e^{-iφ})`.
    ControlledPhase { phi: f64 },
    /// General single-qubit Pauli channel `Σ p_i σ_i ρ σ_i`.
    Pauli { probs: [f64; 4] },
}

impl ChannelSpec {
    pub fn n_qubits(&self) -> usize {
        match self {
            ChannelSpec::ControlledPhase { .. } => 2,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |name: &str, v: f64| {
            if v.is_finite() && (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(QuantumError::InvalidChannel(format!("{name}={v} outside [0,1]")))
            }
        };
        match *self {
            ChannelSpec::Depolarizing { p } => in_unit("p", p),
            ChannelSpec::GeneralizedAmplitudeDamping { eta, gamma } => {
                in_unit("eta", eta)?;
                in_unit("gamma", gamma)
            }
            ChannelSpec::ControlledPhase { phi } => {
                if phi.is_finite() && (0.0..TAU).contains(&phi) {
                    Ok(())
                } else {
                    Err(QuantumError::InvalidChannel(format!("phi={phi} outside [0,2π)")))
                }
            }
            ChannelSpec::Pauli { probs } => {
                if probs.iter().any(|&q| !q.is_finite() || q < 0.0) {
                    return Err(QuantumError::InvalidChannel(format!(
                        "negative or non-finite Pauli probability in {probs:?}"
                    )));
                }
                let sum: f64 = probs.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(QuantumError::InvalidChannel(format!(
                        "Pauli probabilities sum to {sum}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Pauli weights for the channels that are Pauli-diagonal.
    pub fn pauli_probabilities(&self) -> Option<[f64; 4]> {
        match *self {
            ChannelSpec::Depolarizing { p } => Some([1.0 - p, p / 3.0, p / 3.0, p / 3.0]),
            ChannelSpec::Pauli { probs } => Some(probs),
            _ => None,
        }
    }

    /// Kraus representation of the channel.
    pub fn kraus(&self) -> Vec<ComplexMatrix> {
        match *self {
            ChannelSpec::GeneralizedAmplitudeDamping { eta, gamma } => {
                gad_kraus(eta, gamma).to_vec()
            }
            ChannelSpec::ControlledPhase { phi } => vec![controlled_phase(phi)],
            _ => {
                let probs = self.pauli_probabilities().expect("Pauli-diagonal channel");
                pauli_basis(1)
                    .expect("single-qubit basis")
                    .iter()
                    .zip(probs)
                    .filter(|(_, q)| *q > 0.0)
                    .map(|(s, q)| s.scale_real(q.sqrt()))
                    .collect()
            }
        }
    }
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn single_qubit_paulis() -> [ComplexMatrix; 4] {
    let i = C64::new(0.0, 1.0);
    [
        ComplexMatrix::identity(2),
        ComplexMatrix::from_vec(2, vec![c(0.0), c(1.0), c(1.0), c(0.0)]).unwrap(),
        ComplexMatrix::from_vec(2, vec![c(0.0), -i, i, c(0.0)]).unwrap(),
        ComplexMatrix::from_vec(2, vec![c(1.0), c(0.0), c(0.0), c(-1.0)]).unwrap(),
    ]
}

/// Pauli operator basis: `[𝟙, σx, σy, σz]` for one qubit, and the 16 tensor
/// products in lexicographic order (`𝟙𝟙, 𝟙σx, …, σzσz`) for two qubits.
pub fn pauli_basis(n_qubits: usize) -> Result<&'static [ComplexMatrix]> {
    static ONE: OnceLock<Vec<ComplexMatrix>> = OnceLock::new();
    static TWO: OnceLock<Vec<ComplexMatrix>> = OnceLock::new();
    match n_qubits {
        1 => Ok(ONE.get_or_init(|| single_qubit_paulis().to_vec())),
        2 => Ok(TWO.get_or_init(|| {
            let s = single_qubit_paulis();
            s.iter()
                .flat_map(|a| s.iter().map(move |b| a.kron(b)))
                .collect()
        })),
        n => Err(QuantumError::UnsupportedQubits(n)),
    }
}

/// Density matrix of `(1/√d) Σ_k |k⟩|k⟩` with `d = 2^n_qubits`; system first,
/// ancilla second.
pub fn maximally_entangled_state(n_qubits: usize) -> Result<ComplexMatrix> {
    let vec = maximally_entangled_vector(n_qubits)?;
    Ok(ComplexMatrix::outer(&vec))
}

pub(crate) fn maximally_entangled_vector(n_qubits: usize) -> Result<Vec<C64>> {
    if !(1..=2).contains(&n_qubits) {
        return Err(QuantumError::UnsupportedQubits(n_qubits));
    }
    let d = 1usize << n_qubits;
    let amp = c(1.0 / (d as f64).sqrt());
    let mut v = vec![c(0.0); d * d];
    for k in 0..d {
        v[k * d + k] = amp;
    }
    Ok(v)
}

/// Kraus operators `K0..K3` of the generalized amplitude damping channel.
pub fn gad_kraus(eta: f64, gamma: f64) -> [ComplexMatrix; 4] {
    let z = c(0.0);
    let k0 = ComplexMatrix::from_vec(
        2,
        vec![c((1.0 - gamma).sqrt()), z, z, c(((1.0 - gamma) * (1.0 - eta)).sqrt())],
    );
    let k1 = ComplexMatrix::from_vec(2, vec![z, c((eta * (1.0 - gamma)).sqrt()), z, z]);
    let k2 = ComplexMatrix::from_vec(
        2,
        vec![c((gamma * (1.0 - eta)).sqrt()), z, z, c(gamma.sqrt())],
    );
    let k3 = ComplexMatrix::from_vec(2, vec![z, z, c((eta * gamma).sqrt()), z]);
    [k0.unwrap(), k1.unwrap(), k2.unwrap(), k3.unwrap()]
}

fn controlled_phase(phi: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(4, |i, j| match (i, j) {
        (3, 3) => C64::from_polar(1.0, -phi),
        (i, j) if i == j => c(1.0),
        _ => c(0.0),
    })
}

/// Applies the channel to a density matrix of the channel's own dimension.
pub fn apply_channel(spec: &ChannelSpec, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    spec.validate()?;
    let d = 1usize << spec.n_qubits();
    if rho.dim() != d {
        return Err(QuantumError::DimensionMismatch {
            expected: d,
            actual: rho.dim(),
        });
    }
    rho.validate_density(1e-10)?;
    Ok(apply_kraus(&spec.kraus(), rho))
}

fn apply_kraus(kraus: &[ComplexMatrix], rho: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(rho.dim());
    for k in kraus {
        out = &out + &rho.conjugate_by(k);
    }
    out
}

/// Choi state `(Γ ⊗ 𝟙)[|Φ+⟩⟨Φ+|]`, the channel acting on the first half.
pub fn choi_state(spec: &ChannelSpec) -> Result<ComplexMatrix> {
    spec.validate()?;
    let n = spec.n_qubits();
    let d = 1usize << n;
    let phi = maximally_entangled_vector(n)?;
    let ancilla = ComplexMatrix::identity(d);
    // Each Kraus operator maps |Φ+⟩ to a vector; sum the projectors.
    let mut out = ComplexMatrix::zeros(d * d);
    for k in spec.kraus() {
        let op = k.kron(&ancilla);
        let v: Vec<C64> = (0..d * d)
            .map(|i| (0..d * d).map(|j| op[(i, j)] * phi[j]).sum())
            .collect();
        out = &out + &ComplexMatrix::outer(&v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn pauli_basis_elements() {
        let one = pauli_basis(1).unwrap();
        assert_eq!(one[0], ComplexMatrix::identity(2));
        assert_eq!(one[3], ComplexMatrix::from_real_diagonal(&[1.0, -1.0]));
        for s in one.iter().chain(pauli_basis(2).unwrap()) {
            assert!(s.is_unitary(1e-15));
            assert!(s.is_hermitian(1e-15));
        }
    }

    #[test]
    fn two_qubit_xx_by_hand() {
        let xx = &pauli_basis(2).unwrap()[5];
        // σx⊗σx is the anti-diagonal permutation on 4 states.
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i + j == 3 { 1.0 } else { 0.0 };
                assert_eq!(xx[(i, j)], c(expect), "({i},{j})");
            }
        }
        assert!(pauli_basis(3).is_err());
    }

    #[test]
    fn bell_state_entries_and_marginals() {
        let rho = maximally_entangled_state(1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let on = [(0, 0), (0, 3), (3, 0), (3, 3)].contains(&(i, j));
                let expect = if on { 0.5 } else { 0.0 };
                assert!((rho[(i, j)] - c(expect)).norm() < 1e-15);
            }
        }
        let half = ComplexMatrix::identity(2).scale_real(0.5);
        for first in [true, false] {
            let m = rho.partial_trace(2, 2, first).unwrap();
            assert!(m.max_abs_diff(&half) < 1e-15);
        }
        let two = maximally_entangled_state(2).unwrap();
        assert_eq!(two.dim(), 16);
        assert!((two.purity() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gad_kraus_completeness_on_grid() {
        for a in 0..=20 {
            for b in 0..=20 {
                let (eta, gamma) = (a as f64 * 0.05, b as f64 * 0.05);
                let mut sum = ComplexMatrix::zeros(2);
                for k in gad_kraus(eta, gamma) {
                    sum = &sum + &(&k.adjoint() * &k);
                }
                assert!(sum.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-12);
            }
        }
    }

    #[test]
    fn identity_like_channels_leave_states_alone() {
        let rho = ComplexMatrix::from_vec(
            2,
            vec![c(0.7), C64::new(0.1, 0.2), C64::new(0.1, -0.2), c(0.3)],
        )
        .unwrap();
        let out = apply_channel(
            &ChannelSpec::GeneralizedAmplitudeDamping { eta: 0.0, gamma: 0.37 },
            &rho,
        )
        .unwrap();
        assert!(out.max_abs_diff(&rho) < 1e-15);

        let full = apply_channel(&ChannelSpec::Depolarizing { p: 0.75 }, &rho).unwrap();
        assert!(full.max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-15);

        let two = maximally_entangled_state(1).unwrap();
        let out = apply_channel(&ChannelSpec::ControlledPhase { phi: 0.0 }, &two).unwrap();
        assert!(out.max_abs_diff(&two) < 1e-15);
    }

    #[test]
    fn apply_channel_rejects_bad_input() {
        let rho = ComplexMatrix::identity(4).scale_real(0.25);
        assert!(matches!(
            apply_channel(&ChannelSpec::Depolarizing { p: 0.2 }, &rho),
            Err(QuantumError::DimensionMismatch { .. })
        ));
        let not_density = ComplexMatrix::identity(2);
        assert!(apply_channel(&ChannelSpec::Depolarizing { p: 0.2 }, &not_density).is_err());
        assert!(ChannelSpec::Depolarizing { p: 1.2 }.validate().is_err());
        assert!(ChannelSpec::ControlledPhase { phi: 2.0 * PI }.validate().is_err());
        assert!(ChannelSpec::Pauli { probs: [0.5, 0.5, 0.1, -0.1] }.validate().is_err());
    }

    #[test]
    fn choi_of_full_damping_is_ground_state_times_mixed() {
        let choi = choi_state(&ChannelSpec::GeneralizedAmplitudeDamping { eta: 1.0, gamma: 0.0 })
            .unwrap();
        let ground = ComplexMatrix::from_real_diagonal(&[1.0, 0.0]);
        let expect = ground.kron(&ComplexMatrix::identity(2).scale_real(0.5));
        assert!(choi.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn choi_of_identity_phase_is_bell_projector() {
        let choi = choi_state(&ChannelSpec::ControlledPhase { phi: 0.0 }).unwrap();
        assert!(choi.max_abs_diff(&maximally_entangled_state(2).unwrap()) < 1e-15);
    }

    #[test]
    fn isotropic_pauli_equals_full_depolarizing() {
        let a = choi_state(&ChannelSpec::Pauli { probs: [0.25; 4] }).unwrap();
        let b = choi_state(&ChannelSpec::Depolarizing { p: 0.75 }).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }
}
