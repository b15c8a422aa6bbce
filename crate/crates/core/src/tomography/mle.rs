use std::collections::VecDeque;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{QuantumError, Result};
use crate::matrix::ComplexMatrix;
use crate::process::{chi_from_choi, ProcessMatrix};
use crate::tomography::counts::CountsTable;
use crate::tomography::pauli::{walsh_hadamard, PauliTables};

const MU_FLOOR: f64 = 1e-300;

/// Optimizer knobs for [`mle_reconstruct_with`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Converged once the gradient norm (w.r.t. the T entries) falls below this.
    pub gradient_tol: f64,
    /// Converged once `|ΔL| / max(|L − L_sat|, 1)` falls below this on two
    /// consecutive steps, where `L_sat = Σ [c log c − c]` is the saturated
    /// likelihood.
    pub relative_tol: f64,
    /// L-BFGS history length.
    pub memory: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            gradient_tol: 1e-6,
            relative_tol: 1e-10,
            memory: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub chi: ProcessMatrix,
    /// `Σ [c log μ − μ]` at the returned state.
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximum-likelihood reconstruction with the default options, started from
/// the PSD-projected linear-inversion estimate.
pub fn mle_reconstruct(counts: &CountsTable, n_qubits: usize) -> Result<ReconstructionResult> {
    mle_reconstruct_with(counts, n_qubits, &MleOptions::default(), None)
}

/// Maximum-likelihood reconstruction. `start` optionally overrides the initial
/// density matrix (it must be positive definite).
pub fn mle_reconstruct_with(
    counts: &CountsTable,
    n_qubits: usize,
    options: &MleOptions,
    start: Option<&ComplexMatrix>,
) -> Result<ReconstructionResult> {
    if counts.n_qubits() != n_qubits {
        return Err(QuantumError::DimensionMismatch {
            expected: n_qubits,
            actual: counts.n_qubits(),
        });
    }
    counts.validate()?;
    if counts.total() <= 0.0 {
        return Err(QuantumError::AllZeroCounts);
    }
    let objective = Objective::new(counts);
    let initial = match start {
        Some(rho) => {
            if rho.dim() != objective.tables.dim {
                return Err(QuantumError::DimensionMismatch {
                    expected: objective.tables.dim,
                    actual: rho.dim(),
                });
            }
            lower_factor(rho).ok_or_else(|| {
                QuantumError::InvalidDensityMatrix("start state is not positive definite".into())
            })?
        }
        None => initial_factor(counts, objective.tables),
    };

    let x0 = pack(&initial);
    let outcome = lbfgs(&objective, x0, options);
    let rho = objective.density(&unpack(&outcome.x, objective.tables.dim));
    let chi = chi_from_choi(&rho, n_qubits)?;
    Ok(ReconstructionResult {
        chi,
        log_likelihood: objective.saturated - outcome.value,
        iterations: outcome.iterations,
        converged: outcome.converged,
    })
}

/// `Σ [c log μ − μ]` with `μ = n_i Tr(ρ Π)` for a density matrix `rho` on
/// the measured qubits.
pub fn log_likelihood(counts: &CountsTable, rho: &ComplexMatrix) -> Result<f64> {
    let objective = Objective::new(counts);
    if rho.dim() != objective.tables.dim {
        return Err(QuantumError::DimensionMismatch {
            expected: objective.tables.dim,
            actual: rho.dim(),
        });
    }
    let ex = objective.tables.expectations(rho);
    Ok(objective.likelihood_from_expectations(&ex, None))
}

/// Linear-inversion estimate of the measured state: every Pauli expectation is
/// averaged over the settings that measure it. Hermitian with unit trace but
/// not necessarily PSD.
pub fn linear_inversion(counts: &CountsTable) -> Result<ComplexMatrix> {
    counts.validate()?;
    if counts.total() <= 0.0 {
        return Err(QuantumError::AllZeroCounts);
    }
    let tables = PauliTables::for_channel_qubits(counts.n_qubits());
    Ok(linear_inversion_with(counts, tables))
}

fn linear_inversion_with(counts: &CountsTable, tables: &PauliTables) -> ComplexMatrix {
    let n_strings = tables.strings.len();
    let mut sums = vec![0.0; n_strings];
    let mut hits = vec![0usize; n_strings];
    let mut buf = vec![0.0; tables.dim];
    for s in 0..tables.n_settings() {
        let c = counts.setting_counts(s);
        let total: f64 = c.iter().sum();
        if total <= 0.0 {
            continue;
        }
        buf.copy_from_slice(c);
        walsh_hadamard(&mut buf);
        for (mask, &p) in tables.setting_paulis[s].iter().enumerate() {
            sums[p] += buf[mask] / total;
            hits[p] += 1;
        }
    }
    let inv_d = 1.0 / tables.dim as f64;
    let coeffs: Vec<f64> = sums
        .iter()
        .zip(&hits)
        .enumerate()
        .map(|(p, (&s, &h))| {
            if p == 0 {
                inv_d
            } else if h == 0 {
                0.0
            } else {
                s / h as f64 * inv_d
            }
        })
        .collect();
    tables.combine(&coeffs).hermitian_part()
}

/// Starting factor: linear inversion, eigenvalues clipped and renormalized,
/// blended with a little of the maximally mixed state so the factor is
/// invertible; falls back to the maximally mixed state.
fn initial_factor(counts: &CountsTable, tables: &PauliTables) -> ComplexMatrix {
    let d = tables.dim;
    let mixed = ComplexMatrix::identity(d).scale_real(1.0 / d as f64);
    let li = linear_inversion_with(counts, tables);
    let blended = if li.is_finite() {
        let projected = li.project_to_density();
        &projected.scale_real(1.0 - 1e-3) + &mixed.scale_real(1e-3)
    } else {
        mixed.clone()
    };
    lower_factor(&blended)
        .or_else(|| lower_factor(&mixed))
        .expect("maximally mixed state is positive definite")
}

/// Lower-triangular `T` with real positive diagonal and `T†T = rho`.
fn lower_factor(rho: &ComplexMatrix) -> Option<ComplexMatrix> {
    let d = rho.dim();
    // Cholesky of the index-reversed matrix gives rho = U U† with U upper;
    // then T = U† is lower-triangular with T†T = rho.
    let rev = ComplexMatrix::from_fn(d, |i, j| rho[(d - 1 - i, d - 1 - j)]);
    let mut l = ComplexMatrix::zeros(d);
    for j in 0..d {
        let mut diag = rev[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in (j + 1)..d {
            let mut v = rev[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / ljj;
        }
    }
    let upper = ComplexMatrix::from_fn(d, |i, j| l[(d - 1 - i, d - 1 - j)]);
    Some(upper.adjoint())
}

/// Real coordinates of a lower-triangular factor: for each row `i` and column
/// `j ≤ i`, the real part, followed by the imaginary part when `j < i`.
fn pack(t: &ComplexMatrix) -> Vec<f64> {
    let d = t.dim();
    let mut x = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..=i {
            x.push(t[(i, j)].re);
            if j < i {
                x.push(t[(i, j)].im);
            }
        }
    }
    x
}

fn unpack(x: &[f64], d: usize) -> ComplexMatrix {
    let mut t = ComplexMatrix::zeros(d);
    let mut it = x.iter();
    for i in 0..d {
        for j in 0..=i {
            let re = *it.next().expect("packed length");
            let im = if j < i { *it.next().expect("packed length") } else { 0.0 };
            t[(i, j)] = C64::new(re, im);
        }
    }
    t
}

struct Objective<'a> {
    tables: &'static PauliTables,
    counts: &'a CountsTable,
    mean: f64,
    saturated: f64,
}

impl<'a> Objective<'a> {
    fn new(counts: &'a CountsTable) -> Self {
        Self {
            tables: PauliTables::for_channel_qubits(counts.n_qubits()),
            counts,
            mean: counts.mean_per_setting(),
            saturated: counts
                .counts()
                .iter()
                .filter(|&&c| c > 0.0)
                .map(|&c| c * c.ln() - c)
                .sum(),
        }
    }

    fn density(&self, t: &ComplexMatrix) -> ComplexMatrix {
        let a = &t.adjoint() * t;
        let tr = a.trace().re;
        a.scale_real(1.0 / tr).hermitian_part()
    }

    /// Log-likelihood from Pauli expectations; optionally accumulates
    /// `∂L/∂Tr(ρP)` into `grad`.
    fn likelihood_from_expectations(&self, ex: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let tables = self.tables;
        let d = tables.dim;
        let inv_d = 1.0 / d as f64;
        let mut probs = vec![0.0; d];
        let mut weights = vec![0.0; d];
        let mut total = 0.0;
        for s in 0..tables.n_settings() {
            tables.setting_probabilities(ex, s, &mut probs);
            let c = self.counts.setting_counts(s);
            for o in 0..d {
                let mu = self.mean * probs[o].max(0.0);
                let mu_safe = mu.max(MU_FLOOR);
                if c[o] > 0.0 {
                    total += c[o] * mu_safe.ln();
                    weights[o] = self.mean * (c[o] / mu_safe - 1.0);
                } else {
                    weights[o] = -self.mean;
                }
                total -= mu;
            }
            if let Some(g) = grad.as_deref_mut() {
                walsh_hadamard(&mut weights);
                for (mask, &p) in tables.setting_paulis[s].iter().enumerate() {
                    g[p] += weights[mask] * inv_d;
                }
            }
        }
        total
    }

    /// Returns `L_sat − L` (non-negative up to rounding) and its gradient with respect to the packed T coordinates.
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let d = self.tables.dim;
        let t = unpack(x, d);
        let a = &t.adjoint() * &t;
        let tr = a.trace().re;
        let rho = a.scale_real(1.0 / tr);
        let ex = self.tables.expectations(&rho);
        let mut g_pauli = vec![0.0; ex.len()];
        let value = self.likelihood_from_expectations(&ex, Some(&mut g_pauli));

        // dL = Tr(M dρ) with M = Σ g_P P; through ρ = A/Tr A and A = T†T.
        let m = self.tables.combine(&g_pauli);
        let m_rho = (&m * &rho).trace().re;
        let mut m_prime = m;
        for i in 0..d {
            m_prime[(i, i)] -= C64::new(m_rho, 0.0);
        }
        let m_prime = m_prime.scale_real(1.0 / tr);
        let tm = &t * &m_prime;

        let mut grad = Vec::with_capacity(x.len());
        for i in 0..d {
            for j in 0..=i {
                let z = tm[(i, j)];
                grad.push(-2.0 * z.re);
                if j < i {
                    grad.push(-2.0 * z.im);
                }
            }
        }
        (self.saturated - value, grad)
    }

    fn value(&self, x: &[f64]) -> f64 {
        let rho = self.density(&unpack(x, self.tables.dim));
        let ex = self.tables.expectations(&rho);
        self.saturated - self.likelihood_from_expectations(&ex, None)
    }
}

struct Outcome {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
    /// Objective after every accepted step, starting with the initial point.
    #[cfg_attr(not(test), allow(dead_code))]
    trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `L_sat − L` with limited-memory BFGS and Armijo backtracking.
fn lbfgs(objective: &Objective<'_>, x0: Vec<f64>, options: &MleOptions) -> Outcome {
    let mut x = x0;
    let (mut f, mut g) = objective.value_and_gradient(&x);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut converged = norm(&g) < options.gradient_tol;
    let mut small_steps = 0;
    let mut trace = vec![f];

    while !converged && iterations < options.max_iterations {
        iterations += 1;
        let mut dir = two_loop(&g, &history);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) || !slope.is_finite() {
            history.clear();
            dir = two_loop(&g, &history);
            slope = dot(&g, &dir);
        }
        if history.is_empty() {
            // Steepest descent: cap the first trial step to a modest move.
            let scale = 0.1 * norm(&x).max(1.0) / norm(&g).max(f64::MIN_POSITIVE);
            for v in dir.iter_mut() {
                *v *= scale;
            }
            slope *= scale;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            let ft = objective.value(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }

        let Some((x_new, f_new)) = accepted else {
            if history.is_empty() {
                // Even steepest descent cannot improve at double precision.
                converged = true;
                break;
            }
            history.clear();
            continue;
        };

        let (_, g_new) = objective.value_and_gradient(&x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if history.len() == options.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let rel = (f - f_new).abs() / f_new.abs().max(1.0);
        x = x_new;
        f = f_new;
        trace.push(f);
        g = g_new;

        small_steps = if rel < options.relative_tol { small_steps + 1 } else { 0 };
        converged = norm(&g) < options.gradient_tol || small_steps >= 2;
    }

    Outcome {
        x,
        value: f,
        iterations,
        converged,
        trace,
    }
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{choi_state, ChannelSpec};
    use crate::process::{fidelity, ideal_chi};
    use crate::tomography::simulate::{expected_counts, simulate_counts};

    #[test]
    fn gradient_matches_central_differences() {
        let counts = simulate_counts(
            &ChannelSpec::GeneralizedAmplitudeDamping { eta: 0.4, gamma: 0.3 },
            0.5,
            2000.0,
            5,
        )
        .unwrap();
        let objective = Objective::new(&counts);
        let t = initial_factor(&counts, objective.tables);
        let x = pack(&t);
        let (_, g) = objective.value_and_gradient(&x);
        for k in 0..x.len() {
            let h = 1e-6;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (objective.value(&xp) - objective.value(&xm)) / (2.0 * h);
            let scale = g[k].abs().max(fd.abs()).max(1.0);
            assert!((fd - g[k]).abs() / scale < 1e-5, "coord {k}: fd {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn likelihood_never_decreases_along_iterations() {
        for (seed, spec) in [
            (1, ChannelSpec::Depolarizing { p: 0.15 }),
            (2, ChannelSpec::GeneralizedAmplitudeDamping { eta: 0.7, gamma: 0.2 }),
            (3, ChannelSpec::ControlledPhase { phi: 1.1 }),
        ] {
            let counts = simulate_counts(&spec, 0.1, 2000.0, seed).unwrap();
            let objective = Objective::new(&counts);
            let x0 = pack(&initial_factor(&counts, objective.tables));
            let outcome = lbfgs(&objective, x0, &MleOptions::default());
            assert!(outcome.trace.len() > 1);
            for w in outcome.trace.windows(2) {
                assert!(w[1] <= w[0], "{spec:?}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn lower_factor_round_trips() {
        let rho = choi_state(&ChannelSpec::Depolarizing { p: 0.4 }).unwrap();
        let t = lower_factor(&rho).unwrap();
        assert!((&t.adjoint() * &t).max_abs_diff(&rho) < 1e-14);
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert_eq!(t[(i, j)], C64::new(0.0, 0.0));
            }
        }
        assert_eq!(unpack(&pack(&t), 4), t);
    }

    #[test]
    fn noiseless_counts_recover_depolarizing() {
        let spec = ChannelSpec::Depolarizing { p: 0.3 };
        let counts = expected_counts(&spec, 1.0, 2000.0).unwrap();
        let result = mle_reconstruct(&counts, 1).unwrap();
        let f = fidelity(&result.chi, &ideal_chi(&spec).unwrap()).unwrap();
        assert!(f >= 1.0 - 1e-6, "fidelity {f}");
        assert!(result.converged);
    }

    #[test]
    fn linear_inversion_is_exact_for_expected_counts() {
        let spec = ChannelSpec::ControlledPhase { phi: 0.7 };
        let counts = expected_counts(&spec, 1.0, 2000.0).unwrap();
        let li = linear_inversion(&counts).unwrap();
        assert!(li.max_abs_diff(&choi_state(&spec).unwrap()) < 1e-12);
    }

    #[test]
    fn all_zero_counts_rejected() {
        let counts = CountsTable::new(1, 1.0, 2000.0, None, vec![0.0; 36]).unwrap();
        assert!(matches!(mle_reconstruct(&counts, 1), Err(QuantumError::AllZeroCounts)));
        assert!(matches!(linear_inversion(&counts), Err(QuantumError::AllZeroCounts)));
    }

    #[test]
    fn iteration_cap_reports_unconverged() {
        let counts = simulate_counts(&ChannelSpec::Depolarizing { p: 0.2 }, 0.1, 2000.0, 9).unwrap();
        let options = MleOptions {
            max_iterations: 1,
            ..MleOptions::default()
        };
        let result = mle_reconstruct_with(&counts, 1, &options, None).unwrap();
        assert!(!result.converged);
        assert_eq!(result.iterations, 1);
        result.chi.matrix().validate_density(1e-12).unwrap();
    }
}
