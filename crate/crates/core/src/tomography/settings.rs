use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{QuantumError, Result};
use crate::matrix::ComplexMatrix;

/// Local measurement basis of one qubit. Outcome 0 is the +1 eigenvector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    /// Index of the matching Pauli operator (σx = 1, σy = 2, σz = 3).
    pub fn pauli_index(self) -> usize {
        match self {
            Basis::X => 1,
            Basis::Y => 2,
            Basis::Z => 3,
        }
    }

    /// 2×2 matrix whose rows are the eigen-bras `⟨v_0|, ⟨v_1|`.
    fn rotation(self) -> ComplexMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = |x: f64| C64::new(x, 0.0);
        let data = match self {
            Basis::X => vec![r(h), r(h), r(h), r(-h)],
            Basis::Y => vec![r(h), C64::new(0.0, -h), r(h), C64::new(0.0, h)],
            Basis::Z => vec![r(1.0), r(0.0), r(0.0), r(1.0)],
        };
        ComplexMatrix::from_vec(2, data).expect("2x2")
    }
}

/// One product measurement setting over all qubits of the Choi state
/// (system qubits first, then ancillas). Qubit 0 is the most significant bit
/// of the outcome index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementSetting {
    bases: Vec<Basis>,
}

impl MeasurementSetting {
    pub fn new(bases: Vec<Basis>) -> Self {
        Self { bases }
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    pub fn n_qubits(&self) -> usize {
        self.bases.len()
    }

    pub fn n_outcomes(&self) -> usize {
        1 << self.bases.len()
    }

    /// Unitary mapping the setting's eigenbasis onto the computational basis.
    pub fn rotation(&self) -> ComplexMatrix {
        self.bases
            .iter()
            .map(|b| b.rotation())
            .reduce(|acc, r| acc.kron(&r))
            .unwrap_or_else(|| ComplexMatrix::identity(1))
    }

    /// Projector onto the product eigenvector labelled by `outcome`.
    pub fn projector(&self, outcome: usize) -> ComplexMatrix {
        let u = self.rotation();
        let n = u.dim();
        let bra: Vec<C64> = (0..n).map(|j| u[(outcome, j)].conj()).collect();
        ComplexMatrix::outer(&bra)
    }
}

/// All `3^(2n)` local Pauli settings for an `n`-qubit channel, in lexicographic
/// order over (X, Y, Z) with the first qubit varying slowest.
pub fn enumerate_settings(n_qubits: usize) -> Result<Vec<MeasurementSetting>> {
    if !(1..=2).contains(&n_qubits) {
        return Err(QuantumError::UnsupportedQubits(n_qubits));
    }
    let m = 2 * n_qubits;
    let total = 3usize.pow(m as u32);
    Ok((0..total)
        .map(|mut idx| {
            let mut bases = vec![Basis::X; m];
            for slot in bases.iter_mut().rev() {
                *slot = Basis::ALL[idx % 3];
                idx /= 3;
            }
            MeasurementSetting::new(bases)
        })
        .collect())
}

/// Born-rule outcome probabilities `Tr(ρ Π_o)` of one setting.
pub fn outcome_probabilities(rho: &ComplexMatrix, setting: &MeasurementSetting) -> Result<Vec<f64>> {
    let n = setting.n_outcomes();
    if rho.dim() != n {
        return Err(QuantumError::DimensionMismatch {
            expected: n,
            actual: rho.dim(),
        });
    }
    let rotated = rho.conjugate_by(&setting.rotation());
    Ok((0..n).map(|o| rotated[(o, o)].re.max(0.0)).collect())
}
