use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{choi_state, ChannelSpec};
use crate::error::{QuantumError, Result};
use crate::process::{ideal_chi, ProcessMatrix};
use crate::tomography::counts::{draw_counts, CountsTable};
use crate::tomography::mle::mle_reconstruct;
use crate::tomography::pauli::PauliTables;

/// Base mean count per setting before the signal-level rescaling.
pub const DEFAULT_N_BASE: f64 = 2000.0;

fn check_levels(k_factor: f64, n_base: f64) -> Result<()> {
    if !(k_factor > 0.0 && k_factor.is_finite()) {
        return Err(QuantumError::InvalidSampling(format!("k_factor {k_factor}")));
    }
    if !(n_base > 0.0 && n_base.is_finite()) {
        return Err(QuantumError::InvalidSampling(format!("n_base {n_base}")));
    }
    Ok(())
}

/// Per-setting Born probabilities of the channel's Choi state, flattened
/// `[setting][outcome]`.
fn choi_probabilities(spec: &ChannelSpec) -> Result<Vec<f64>> {
    let choi = choi_state(spec)?;
    let tables = PauliTables::for_channel_qubits(spec.n_qubits());
    let ex = tables.expectations(&choi);
    let mut out = vec![0.0; tables.n_settings() * tables.dim];
    for (s, chunk) in out.chunks_mut(tables.dim).enumerate() {
        tables.setting_probabilities(&ex, s, chunk);
    }
    Ok(out)
}

/// Poisson-sampled tomography counts with per-setting mean `k_factor · n_base`.
pub fn simulate_counts(
    spec: &ChannelSpec,
    k_factor: f64,
    n_base: f64,
    seed: u64,
) -> Result<CountsTable> {
    check_levels(k_factor, n_base)?;
    let probs = choi_probabilities(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = draw_counts(&probs, k_factor * n_base, &mut rng)?
        .into_iter()
        .map(|c| c as f64)
        .collect();
    CountsTable::new(spec.n_qubits(), k_factor, n_base, Some(seed), counts)
}

/// Noiseless table holding the expected counts `n_i · p` (infinite-statistics oracle).
pub fn expected_counts(spec: &ChannelSpec, k_factor: f64, n_base: f64) -> Result<CountsTable> {
    check_levels(k_factor, n_base)?;
    let mean = k_factor * n_base;
    let counts = choi_probabilities(spec)?
        .into_iter()
        .map(|p| mean * p.max(0.0))
        .collect();
    CountsTable::new(spec.n_qubits(), k_factor, n_base, None, counts)
}

/// Full simulated tomography run: Choi state, Poisson counts, MLE. Returns
/// `(noisy χ, ideal χ)`; deterministic in `seed`.
pub fn simulate_noisy_chi(
    spec: &ChannelSpec,
    k_factor: f64,
    n_base: f64,
    seed: u64,
) -> Result<(ProcessMatrix, ProcessMatrix)> {
    let counts = simulate_counts(spec, k_factor, n_base, seed)?;
    let result = mle_reconstruct(&counts, spec.n_qubits())?;
    Ok((result.chi, ideal_chi(spec)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::fidelity;

    #[test]
    fn huge_statistics_converge_to_ideal() {
        let spec = ChannelSpec::Depolarizing { p: 0.5 };
        let (noisy, ideal) = simulate_noisy_chi(&spec, 1e6, DEFAULT_N_BASE, 1).unwrap();
        assert!(fidelity(&noisy, &ideal).unwrap() >= 0.9999);
    }

    #[test]
    fn low_signal_mean_counts_per_setting() {
        let spec = ChannelSpec::GeneralizedAmplitudeDamping { eta: 0.5, gamma: 0.5 };
        let counts = simulate_counts(&spec, 0.1, DEFAULT_N_BASE, 2).unwrap();
        assert_eq!(counts.mean_per_setting(), 200.0);
        let per_setting = counts.total() / counts.n_settings() as f64;
        assert!((per_setting - 200.0).abs() < 15.0, "{per_setting}");
    }

    #[test]
    fn noisy_output_is_physical_and_deterministic() {
        let spec = ChannelSpec::ControlledPhase { phi: 1.3 };
        let (a, _) = simulate_noisy_chi(&spec, 0.1, DEFAULT_N_BASE, 77).unwrap();
        let (b, _) = simulate_noisy_chi(&spec, 0.1, DEFAULT_N_BASE, 77).unwrap();
        assert_eq!(a, b);
        let m = a.matrix();
        assert!((m.trace().re - 1.0).abs() < 1e-12);
        assert!(m.min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn rejects_bad_levels() {
        let spec = ChannelSpec::Depolarizing { p: 0.5 };
        assert!(simulate_noisy_chi(&spec, 0.0, 2000.0, 1).is_err());
        assert!(simulate_noisy_chi(&spec, 1.0, -5.0, 1).is_err());
    }
}
