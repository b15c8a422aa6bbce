//! Sparse Pauli-string tables for local-Pauli tomography.
//!
//! For a setting with bases `B_j` the outcome probabilities are a
//! Walsh–Hadamard transform of the expectation values of the `2^m` Pauli
//! strings built from `{𝟙, B_j}`:
//! `p(o) = (1/d) Σ_μ Tr(ρ P_μ) (-1)^{|o ∧ μ|}`.
//! Working on expectation values instead of dense projectors keeps a
//! likelihood evaluation at `O(4^m · 2^m)` for `m` measured qubits.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use crate::matrix::ComplexMatrix;
use crate::tomography::settings::enumerate_settings;

/// `P|x⟩ = phase[x] |x ⊕ flip⟩`.
pub(crate) struct PauliString {
    pub flip: usize,
    pub phase: Vec<C64>,
}

pub(crate) struct PauliTables {
    pub dim: usize,
    pub strings: Vec<PauliString>,
    /// For every setting, the Pauli index selected by each subset mask.
    pub setting_paulis: Vec<Vec<usize>>,
}

impl PauliTables {
    pub fn for_channel_qubits(n_qubits: usize) -> &'static PauliTables {
        static ONE: OnceLock<PauliTables> = OnceLock::new();
        static TWO: OnceLock<PauliTables> = OnceLock::new();
        match n_qubits {
            1 => ONE.get_or_init(|| PauliTables::build(1)),
            2 => TWO.get_or_init(|| PauliTables::build(2)),
            n => panic!("unsupported qubit count {n}"),
        }
    }

    fn build(n_qubits: usize) -> Self {
        let m = 2 * n_qubits;
        let dim = 1usize << m;
        let n_strings = 1usize << (2 * m);
        let strings = (0..n_strings)
            .map(|idx| {
                let mut flip = 0;
                let mut phase = vec![C64::new(1.0, 0.0); dim];
                for q in 0..m {
                    let op = (idx >> (2 * (m - 1 - q))) & 3;
                    let bit = 1usize << (m - 1 - q);
                    if op == 1 || op == 2 {
                        flip |= bit;
                    }
                    for (x, ph) in phase.iter_mut().enumerate() {
                        let b = x & bit != 0;
                        *ph *= match (op, b) {
                            (0, _) | (1, _) => C64::new(1.0, 0.0),
                            (2, false) => C64::new(0.0, 1.0),
                            (2, true) => C64::new(0.0, -1.0),
                            (3, false) => C64::new(1.0, 0.0),
                            (3, true) => C64::new(-1.0, 0.0),
                            _ => unreachable!(),
                        };
                    }
                }
                PauliString { flip, phase }
            })
            .collect();

        let setting_paulis = enumerate_settings(n_qubits)
            .expect("supported size")
            .iter()
            .map(|s| {
                (0..dim)
                    .map(|mask| {
                        s.bases().iter().enumerate().fold(0usize, |acc, (q, b)| {
                            let bit = 1usize << (m - 1 - q);
                            let op = if mask & bit != 0 { b.pauli_index() } else { 0 };
                            acc | (op << (2 * (m - 1 - q)))
                        })
                    })
                    .collect()
            })
            .collect();

        Self {
            dim,
            strings,
            setting_paulis,
        }
    }

    pub fn n_settings(&self) -> usize {
        self.setting_paulis.len()
    }

    /// `Tr(ρ P)` for every Pauli string.
    pub fn expectations(&self, rho: &ComplexMatrix) -> Vec<f64> {
        let d = self.dim;
        let data = rho.as_slice();
        self.strings
            .iter()
            .map(|p| {
                let mut acc = 0.0;
                for x in 0..d {
                    let z = data[x * d + (x ^ p.flip)] * p.phase[x];
                    acc += z.re;
                }
                acc
            })
            .collect()
    }

    /// Outcome probabilities of setting `s` from the Pauli expectations.
    pub fn setting_probabilities(&self, expectations: &[f64], s: usize, out: &mut [f64]) {
        for (slot, &p) in out.iter_mut().zip(&self.setting_paulis[s]) {
            *slot = expectations[p];
        }
        walsh_hadamard(out);
        let inv = 1.0 / self.dim as f64;
        for v in out.iter_mut() {
            *v *= inv;
        }
    }

    /// Dense operator `Σ_P g_P P`.
    pub fn combine(&self, coeffs: &[f64]) -> ComplexMatrix {
        let d = self.dim;
        let mut m = ComplexMatrix::zeros(d);
        let data = m.as_mut_slice();
        for (p, &g) in self.strings.iter().zip(coeffs) {
            if g == 0.0 {
                continue;
            }
            for x in 0..d {
                data[(x ^ p.flip) * d + x] += p.phase[x] * g;
            }
        }
        m
    }
}

/// Unnormalized in-place Walsh–Hadamard transform.
pub(crate) fn walsh_hadamard(v: &mut [f64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{choi_state, pauli_basis, ChannelSpec};
    use crate::tomography::settings::outcome_probabilities;

    #[test]
    fn sparse_strings_match_dense_kron() {
        let tables = PauliTables::for_channel_qubits(1);
        let basis = pauli_basis(1).unwrap();
        for (idx, p) in tables.strings.iter().enumerate() {
            let dense = basis[idx / 4].kron(&basis[idx % 4]);
            for x in 0..4 {
                for y in 0..4 {
                    let expect = if y == x ^ p.flip { p.phase[x] } else { C64::new(0.0, 0.0) };
                    assert_eq!(dense[(y, x)], expect);
                }
            }
        }
    }

    #[test]
    fn transform_matches_rotation_probabilities() {
        for spec in [
            ChannelSpec::GeneralizedAmplitudeDamping { eta: 0.3, gamma: 0.8 },
            ChannelSpec::ControlledPhase { phi: 2.2 },
        ] {
            let choi = choi_state(&spec).unwrap();
            let tables = PauliTables::for_channel_qubits(spec.n_qubits());
            let ex = tables.expectations(&choi);
            let settings = enumerate_settings(spec.n_qubits()).unwrap();
            let mut buf = vec![0.0; tables.dim];
            for (s, setting) in settings.iter().enumerate() {
                tables.setting_probabilities(&ex, s, &mut buf);
                let reference = outcome_probabilities(&choi, setting).unwrap();
                for (a, b) in buf.iter().zip(&reference) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn combine_inverts_expectations() {
        let choi = choi_state(&ChannelSpec::Depolarizing { p: 0.2 }).unwrap();
        let tables = PauliTables::for_channel_qubits(1);
        let ex = tables.expectations(&choi);
        let coeffs: Vec<f64> = ex.iter().map(|e| e / tables.dim as f64).collect();
        assert!(tables.combine(&coeffs).max_abs_diff(&choi) < 1e-14);
    }
}
