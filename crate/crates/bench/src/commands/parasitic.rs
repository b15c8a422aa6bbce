use qpt_core::seed::derive_seed;
use qpt_core::tomography::simulate_noisy_chi;
use qpt_core::ChannelSpec;
use qpt_pipeline::{ChannelFamily, Estimator, EstimatorKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::train::{load_models, AUTOENCODER, CASCADE};
use super::{csv_writer, save_config, write_json, RunLock};
use crate::config::{ExperimentConfig, RunLayout};
use crate::error::{BenchError, Result};
use crate::metrics::mean_std;

/// Pauli probabilities `(p0, p1, p2, p3)` drawn from a Dirichlet distribution
/// centred on the depolarizing point `(1 − p, p/3, p/3, p/3)`. The
/// concentration is `1/ε²`, so each component's relative spread is about ε.
/// Components with zero mean stay zero; ε = 0 returns the centre exactly.
pub fn jittered_probabilities(p: f64, jitter: f64, rng: &mut impl Rng) -> Result<[f64; 4]> {
    if !(0.0..=1.0).contains(&p) || !(0.0..1.0).contains(&jitter) {
        return Err(BenchError::Config(format!("jitter {jitter} around p = {p} is not a valid distribution")));
    }
    let centre = [1.0 - p, p / 3.0, p / 3.0, p / 3.0];
    if jitter == 0.0 {
        return Ok(centre);
    }
    let concentration = 1.0 / (jitter * jitter);
    let mut draws = [0.0; 4];
    for (d, &m) in draws.iter_mut().zip(&centre) {
        if m > 0.0 {
            *d = Gamma::new(concentration * m, 1.0)
                .map_err(|e| BenchError::Config(e.to_string()))?
                .sample(rng);
        }
    }
    let total: f64 = draws.iter().sum();
    let mut probs = draws.map(|d| d / total);
    if probs.iter().any(|q| !q.is_finite() || *q < 0.0) {
        return Err(BenchError::Config(format!("jitter produced invalid probabilities {probs:?}")));
    }
    // Absorb rounding so the four probabilities sum to 1.
    let rest: f64 = probs[1..].iter().sum();
    probs[0] = (1.0 - rest).max(0.0);
    Ok(probs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParasiticCell {
    pub p_exp: f64,
    pub k_factor: f64,
    /// Training signal level of the networks used for this cell.
    pub model_k: f64,
    pub method: EstimatorKind,
    pub mean_p_true: f64,
    pub mean_estimate: f64,
    pub std_estimate: f64,
    pub mean_residue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParasiticSummary {
    pub rows: usize,
    pub jitter: f64,
    pub cells: Vec<ParasiticCell>,
}

/// Trained k closest to `k` on a log scale; ties go to the smaller k.
fn nearest_model_k(trained: &[f64], k: f64) -> f64 {
    let mut sorted = trained.to_vec();
    sorted.sort_by(f64::total_cmp);
    let dist = |t: f64| (t.ln() - k.ln()).abs();
    sorted
        .into_iter()
        .reduce(|best, t| if dist(t) < dist(best) { t } else { best })
        .expect("at least one k")
}

/// Robustness study on anisotropic Pauli channels, estimated with MF and the
/// cascade trained on ideal depolarizing channels.
pub fn parasitic(config: &ExperimentConfig) -> Result<ParasiticSummary> {
    config.validate()?;
    if config.family != ChannelFamily::Dc {
        return Err(BenchError::Config(format!(
            "the parasitic study needs the dc family, config has {}",
            config.family
        )));
    }
    let plan = &config.parasitic;
    let layout = RunLayout::new(&config.output_dir);
    let _lock = RunLock::acquire(&layout.root)?;
    save_config(config, &layout)?;
    let family = ChannelFamily::Dc;
    let mf = Estimator::mf(family);
    let dir = layout.parasitic_dir();
    let mut rows = csv_writer(&dir.join("parasitic.csv"))?;
    rows.write_record([
        "p_exp", "k_factor", "repetition", "seed", "p0", "p1", "p2", "p3", "p_true", "model_k", "mf", "ann_ff",
        "residue_mf", "residue_ann_ff",
    ])?;
    let mut cells = Vec::new();
    let mut n_rows = 0;
    let master = config.parasitic_seed();
    for (i, &p_exp) in plan.p_exp.iter().enumerate() {
        for (j, &k) in plan.k_factors.iter().enumerate() {
            let model_k = nearest_model_k(&config.k_factors, k);
            let cascade = Estimator::ann_ff(
                family,
                load_models(&layout, family, model_k, AUTOENCODER)?,
                load_models(&layout, family, model_k, CASCADE)?,
            )?;
            let mut truths = Vec::with_capacity(plan.repetitions);
            let mut probs = Vec::with_capacity(plan.repetitions);
            let mut seeds = Vec::with_capacity(plan.repetitions);
            let mut noisy = Vec::with_capacity(plan.repetitions);
            for r in 0..plan.repetitions {
                let seed = derive_seed(master, &[i as u64, j as u64, r as u64]);
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
                let q = jittered_probabilities(p_exp, plan.jitter, &mut rng)?;
                let (chi, _) = simulate_noisy_chi(&ChannelSpec::Pauli { probs: q }, k, config.dataset.n_base, seed)
                    .map_err(|e| BenchError::Data(e.to_string()))?;
                truths.push(1.0 - q[0]);
                probs.push(q);
                seeds.push(seed);
                noisy.push(chi.into_matrix());
            }
            let refs: Vec<_> = noisy.iter().collect();
            let mf_est: Vec<f64> = mf.estimate_batch(&refs)?.into_iter().map(|r| r.estimate[0]).collect();
            let nn_est: Vec<f64> = cascade.estimate_batch(&refs)?.into_iter().map(|r| r.estimate[0]).collect();
            for r in 0..plan.repetitions {
                let q = probs[r];
                rows.write_record([
                    p_exp.to_string(),
                    k.to_string(),
                    r.to_string(),
                    seeds[r].to_string(),
                    q[0].to_string(),
                    q[1].to_string(),
                    q[2].to_string(),
                    q[3].to_string(),
                    truths[r].to_string(),
                    model_k.to_string(),
                    mf_est[r].to_string(),
                    nn_est[r].to_string(),
                    (mf_est[r] - truths[r]).abs().to_string(),
                    (nn_est[r] - truths[r]).abs().to_string(),
                ])?;
                n_rows += 1;
            }
            for (method, est) in [(EstimatorKind::Mf, &mf_est), (EstimatorKind::AnnFf, &nn_est)] {
                let residues: Vec<f64> = est.iter().zip(&truths).map(|(e, t)| (e - t).abs()).collect();
                let (mean_estimate, std_estimate) = mean_std(est);
                cells.push(ParasiticCell {
                    p_exp,
                    k_factor: k,
                    model_k,
                    method,
                    mean_p_true: mean_std(&truths).0,
                    mean_estimate,
                    std_estimate,
                    mean_residue: mean_std(&residues).0,
                });
            }
        }
    }
    rows.flush()?;
    let summary = ParasiticSummary {
        rows: n_rows,
        jitter: plan.jitter,
        cells,
    };
    let mut table = csv_writer(&dir.join("summary.csv"))?;
    table.write_record(["p_exp", "k_factor", "model_k", "method", "mean_p_true", "mean_estimate", "std_estimate", "mean_residue"])?;
    for c in &summary.cells {
        table.write_record([
            c.p_exp.to_string(),
            c.k_factor.to_string(),
            c.model_k.to_string(),
            c.method.tag().to_string(),
            c.mean_p_true.to_string(),
            c.mean_estimate.to_string(),
            c.std_estimate.to_string(),
            c.mean_residue.to_string(),
        ])?;
    }
    table.flush()?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}
