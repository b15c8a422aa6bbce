use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{QuantumError, Result};

/// Outcome counts of a full local-Pauli tomography run.
///
/// Every setting shares the mean count target `k_factor · n_base`. Counts are
/// stored as reals so that noiseless expected-value tables can be represented
/// exactly; sampled tables only ever hold non-negative integers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountsTable {
    n_qubits: usize,
    k_factor: f64,
    n_base: f64,
    seed: Option<u64>,
    /// Row-major `[setting][outcome]`.
    counts: Vec<f64>,
}

impl CountsTable {
    pub fn new(
        n_qubits: usize,
        k_factor: f64,
        n_base: f64,
        seed: Option<u64>,
        counts: Vec<f64>,
    ) -> Result<Self> {
        if !(1..=2).contains(&n_qubits) {
            return Err(QuantumError::UnsupportedQubits(n_qubits));
        }
        let table = Self {
            n_qubits,
            k_factor,
            n_base,
            seed,
            counts,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_factor > 0.0 && self.k_factor.is_finite()) {
            return Err(QuantumError::InvalidCounts(format!("k_factor {}", self.k_factor)));
        }
        if !(self.n_base > 0.0 && self.n_base.is_finite()) {
            return Err(QuantumError::InvalidCounts(format!("n_base {}", self.n_base)));
        }
        let expected = self.n_settings() * self.n_outcomes();
        if self.counts.len() != expected {
            return Err(QuantumError::InvalidCounts(format!(
                "expected {expected} counts (complete setting set), got {}",
                self.counts.len()
            )));
        }
        if let Some(bad) = self.counts.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(QuantumError::InvalidCounts(format!("count {bad} is not a non-negative number")));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_settings(&self) -> usize {
        3usize.pow(2 * self.n_qubits as u32)
    }

    pub fn n_outcomes(&self) -> usize {
        1 << (2 * self.n_qubits)
    }

    pub fn k_factor(&self) -> f64 {
        self.k_factor
    }

    pub fn n_base(&self) -> f64 {
        self.n_base
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Mean number of events per setting, `n_i = k_i · n`.
    pub fn mean_per_setting(&self) -> f64 {
        self.k_factor * self.n_base
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn setting_counts(&self, setting: usize) -> &[f64] {
        let n = self.n_outcomes();
        &self.counts[setting * n..(setting + 1) * n]
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Draws one Poisson count per outcome with mean `mean_n · prob`.
pub fn sample_counts(probs: &[f64], mean_n: f64, seed: u64) -> Result<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_counts(probs, mean_n, &mut rng)
}

pub(crate) fn draw_counts(probs: &[f64], mean_n: f64, rng: &mut ChaCha8Rng) -> Result<Vec<u64>> {
    if !(mean_n > 0.0 && mean_n.is_finite()) {
        return Err(QuantumError::InvalidSampling(format!("mean count {mean_n}")));
    }
    probs
        .iter()
        .map(|&p| {
            let lambda = mean_n * p.max(0.0);
            if lambda <= 0.0 {
                return Ok(0);
            }
            let dist = Poisson::new(lambda)
                .map_err(|e| QuantumError::InvalidSampling(format!("Poisson({lambda}): {e}")))?;
            Ok(dist.sample(rng) as u64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_probability_outcomes_are_never_counted() {
        let probs = [1.0, 0.0, 0.0, 0.0];
        for seed in 0..20 {
            let c = sample_counts(&probs, 200.0, seed).unwrap();
            assert!(c[1..].iter().all(|&x| x == 0));
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(
            sample_counts(&probs, 2000.0, 42).unwrap(),
            sample_counts(&probs, 2000.0, 42).unwrap()
        );
        assert_ne!(
            sample_counts(&probs, 2000.0, 42).unwrap(),
            sample_counts(&probs, 2000.0, 43).unwrap()
        );
    }

    #[test]
    fn empirical_mean_within_three_sigma() {
        let probs = [0.05, 0.15, 0.3, 0.5];
        let mean_n = 200.0;
        let draws = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sums = [0.0f64; 4];
        for _ in 0..draws {
            for (s, c) in sums.iter_mut().zip(draw_counts(&probs, mean_n, &mut rng).unwrap()) {
                *s += c as f64;
            }
        }
        for (s, p) in sums.iter().zip(probs) {
            let lambda = mean_n * p;
            let sigma_of_mean = (lambda / draws as f64).sqrt();
            assert!((s / draws as f64 - lambda).abs() < 3.0 * sigma_of_mean, "p={p}");
        }
    }

    #[test]
    fn rejects_non_positive_mean() {
        assert!(sample_counts(&[1.0], 0.0, 1).is_err());
    }

    #[test]
    fn table_validation() {
        assert!(CountsTable::new(1, 1.0, 2000.0, None, vec![1.0; 36]).is_ok());
        assert!(CountsTable::new(1, 1.0, 2000.0, None, vec![1.0; 35]).is_err());
        assert!(CountsTable::new(1, 1.0, 2000.0, None, vec![-1.0; 36]).is_err());
        assert!(CountsTable::new(1, 0.0, 2000.0, None, vec![1.0; 36]).is_err());
    }
}
