//! Maximum-fidelity grid search over a family's analytic process matrices.

use std::sync::OnceLock;

use qpt_core::{ideal_chi, pauli_basis, ChannelSpec, ComplexMatrix, FidelityReference, C64};

use crate::error::Result;
use crate::family::ChannelFamily;

/// Grid step of the one-dimensional searches and of the refinement stage.
pub const FINE_STEP: f64 = 0.001;
/// Coarse grid step of the two-dimensional search.
pub const COARSE_STEP: f64 = 0.01;

const FINE_PER_UNIT: usize = 1000;
const COARSE_PER_UNIT: usize = 100;

/// Number of fine φ grid points below 2π.
fn cp_grid_len() -> usize {
    (std::f64::consts::TAU / FINE_STEP).ceil() as usize
}

/// Returns the parameters whose analytic χ has the highest fidelity with `chi`.
/// Grid points are visited in increasing order and only a strictly larger
/// fidelity replaces the incumbent, so ties go to the smaller value.
pub fn mf_search(chi: &ComplexMatrix, family: ChannelFamily) -> Result<Vec<f64>> {
    let reference = FidelityReference::from_matrix(chi)?;
    match family {
        ChannelFamily::Dc => {
            let candidates = dc_candidates();
            let best = argmax(candidates.len(), |i| reference.fidelity_matrix(&candidates[i]))?;
            Ok(vec![best as f64 / FINE_PER_UNIT as f64])
        }
        ChannelFamily::Cp => {
            let vectors = cp_vectors();
            let best = argmax(vectors.len(), |i| reference.fidelity_pure(&vectors[i]))?;
            Ok(vec![best as f64 / FINE_PER_UNIT as f64])
        }
        ChannelFamily::Gad => gad_search(&reference),
    }
}

fn argmax(n: usize, mut f: impl FnMut(usize) -> qpt_core::Result<f64>) -> Result<usize> {
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..n {
        let v = f(i)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    Ok(best.0)
}

fn dc_candidates() -> &'static [ComplexMatrix] {
    static GRID: OnceLock<Vec<ComplexMatrix>> = OnceLock::new();
    GRID.get_or_init(|| {
        (0..=FINE_PER_UNIT)
            .map(|i| {
                let p = i as f64 / FINE_PER_UNIT as f64;
                ideal_chi(&ChannelSpec::Depolarizing { p }).expect("grid inside [0,1]").into_matrix()
            })
            .collect()
    })
}

/// χ of a unitary channel is `|v⟩⟨v|` with `v_m = Tr(P_m† U) / d`.
pub fn unitary_chi_vector(u: &ComplexMatrix) -> Result<Vec<C64>> {
    let d = u.dim();
    let n_qubits = d.trailing_zeros() as usize;
    let basis = pauli_basis(n_qubits)?;
    Ok(basis
        .iter()
        .map(|p| (&p.adjoint() * u).trace() / d as f64)
        .collect())
}

fn cp_vectors() -> &'static [Vec<C64>] {
    static GRID: OnceLock<Vec<Vec<C64>>> = OnceLock::new();
    GRID.get_or_init(|| {
        (0..cp_grid_len())
            .map(|i| {
                let phi = i as f64 / FINE_PER_UNIT as f64;
                let kraus = ChannelSpec::ControlledPhase { phi }.kraus();
                unitary_chi_vector(&kraus[0]).expect("two-qubit unitary")
            })
            .collect()
    })
}

fn gad_chi(i_eta: usize, i_gamma: usize, per_unit: usize) -> ComplexMatrix {
    let spec = ChannelSpec::GeneralizedAmplitudeDamping {
        eta: i_eta as f64 / per_unit as f64,
        gamma: i_gamma as f64 / per_unit as f64,
    };
    ideal_chi(&spec).expect("grid inside [0,1]²").into_matrix()
}

fn gad_coarse() -> &'static [ComplexMatrix] {
    static GRID: OnceLock<Vec<ComplexMatrix>> = OnceLock::new();
    GRID.get_or_init(|| {
        let n = COARSE_PER_UNIT + 1;
        (0..n * n).map(|i| gad_chi(i / n, i % n, COARSE_PER_UNIT)).collect()
    })
}

/// Coarse 0.01 × 0.01 pass, then a 0.001 pass over the ±0.01 box around the
/// coarse winner (clipped to [0,1]²), then steepest ascent over the 8 fine-grid
/// neighbours until none improves. The ascent matters near η = 0, where the
/// fidelity is almost flat in γ and the coarse winner can sit far from the
/// optimum. Row-major order, η outer.
fn gad_search(reference: &FidelityReference) -> Result<Vec<f64>> {
    let coarse = gad_coarse();
    let n = COARSE_PER_UNIT + 1;
    let best = argmax(coarse.len(), |i| reference.fidelity_matrix(&coarse[i]))?;
    let ratio = FINE_PER_UNIT / COARSE_PER_UNIT;
    let window = |c: usize| {
        let center = c * ratio;
        (center.saturating_sub(ratio), (center + ratio).min(FINE_PER_UNIT))
    };
    let (eta_lo, eta_hi) = window(best / n);
    let (gamma_lo, gamma_hi) = window(best % n);
    let width = gamma_hi - gamma_lo + 1;
    let cells = (eta_hi - eta_lo + 1) * width;
    let fid = |i: usize, j: usize| reference.fidelity_matrix(&gad_chi(i, j, FINE_PER_UNIT));
    let fine = argmax(cells, |c| fid(eta_lo + c / width, gamma_lo + c % width))?;
    let mut at = (eta_lo + fine / width, gamma_lo + fine % width);
    let mut value = fid(at.0, at.1)?;
    loop {
        let mut step = None;
        for i in at.0.saturating_sub(1)..=(at.0 + 1).min(FINE_PER_UNIT) {
            for j in at.1.saturating_sub(1)..=(at.1 + 1).min(FINE_PER_UNIT) {
                if (i, j) == at {
                    continue;
                }
                let v = fid(i, j)?;
                if v > value {
                    value = v;
                    step = Some((i, j));
                }
            }
        }
        match step {
            Some(next) => at = next,
            None => break,
        }
    }
    Ok(vec![
        at.0 as f64 / FINE_PER_UNIT as f64,
        at.1 as f64 / FINE_PER_UNIT as f64,
    ])
}
