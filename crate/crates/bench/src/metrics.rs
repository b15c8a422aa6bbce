//! Residue statistics, success rates and the paired bootstrap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Percentage of values at or below `cutoff`.
pub fn success_pct(values: &[f64], cutoff: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    100.0 * values.iter().filter(|&&v| v <= cutoff).count() as f64 / values.len() as f64
}

/// Percentage of grid points whose success percentage exceeds `level` (a fraction).
pub fn aggregate_rate(per_grid_pct: &[f64], level: f64) -> f64 {
    if per_grid_pct.is_empty() {
        return 0.0;
    }
    let threshold = 100.0 * level;
    100.0 * per_grid_pct.iter().filter(|&&p| p > threshold).count() as f64 / per_grid_pct.len() as f64
}

/// `|φ̂ − φ| / φ`, undefined at φ = 0.
pub fn relative_residue(estimate: f64, truth: f64) -> Option<f64> {
    (truth > 0.0).then(|| (estimate - truth).abs() / truth)
}

/// Equal-width bins over `[0, max]`; values above `max` are counted in the last bin.
pub fn histogram(values: &[f64], bins: usize, max: f64) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    for &v in values {
        let b = ((v / max) * bins as f64).floor();
        let b = if b.is_nan() || b < 0.0 { 0 } else { (b as usize).min(bins - 1) };
        counts[b] += 1;
    }
    counts
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedBootstrap {
    /// Mean of `a − b` over the pairs.
    pub mean_diff: f64,
    /// One-sided upper confidence bound on the mean difference.
    pub upper_bound: f64,
    pub confidence: f64,
    /// `a` has a lower mean than `b` at the given confidence.
    pub significant: bool,
}

/// Paired bootstrap of `mean(a) − mean(b)`: pairs are resampled with
/// replacement and the upper bound is the `confidence` quantile of the
/// resampled mean differences.
pub fn paired_bootstrap(a: &[f64], b: &[f64], resamples: usize, confidence: f64, seed: u64) -> PairedBootstrap {
    assert_eq!(a.len(), b.len(), "paired samples differ in length");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let mean_diff = diffs.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| diffs[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let idx = ((confidence * resamples as f64).ceil() as usize).clamp(1, resamples) - 1;
    let upper_bound = means[idx];
    PairedBootstrap {
        mean_diff,
        upper_bound,
        confidence,
        significant: upper_bound < 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_statistics() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(success_pct(&[0.05, 0.1, 0.2, 0.3], 0.1), 50.0);
        assert_eq!(aggregate_rate(&[100.0, 99.0, 99.5, 50.0], 0.99), 50.0);
        assert_eq!(relative_residue(1.0, 0.0), None);
        assert!((relative_residue(1.03, 1.0).unwrap() - 0.03).abs() < 1e-12);
        assert_eq!(histogram(&[0.0, 0.05, 0.099, 0.1, 5.0], 2, 0.2), vec![3, 2]);
    }

    #[test]
    fn bootstrap_detects_a_clear_shift() {
        let a: Vec<f64> = (0..500).map(|i| (i % 7) as f64 * 0.01).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 0.01).collect();
        let r = paired_bootstrap(&a, &b, 1000, 0.95, 1);
        assert!(r.significant);
        assert!((r.mean_diff + 0.01).abs() < 1e-12);
        let same = paired_bootstrap(&a, &a, 1000, 0.95, 1);
        assert!(!same.significant);
    }
}
