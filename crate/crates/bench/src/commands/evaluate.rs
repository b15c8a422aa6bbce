use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;

use qpt_pipeline::datasets::{generate, SampleRecord};
use qpt_pipeline::{
    denoise_fidelity_audit, write_results_csv, ChannelFamily, EstimationResult, Estimator, EstimatorKind,
};
use serde::{Deserialize, Serialize};

use super::train::{load_models, AUTOENCODER, BASELINE, CASCADE};
use super::{csv_writer, save_config, selected_ks, write_json, RunLock};
use crate::config::{ExperimentConfig, RunLayout};
use crate::error::{BenchError, Result};
use crate::metrics::{aggregate_rate, histogram, mean_std, paired_bootstrap, relative_residue, success_pct, PairedBootstrap};

pub const EVAL_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub grid_index: u64,
    pub params: Vec<f64>,
    pub mean_residue: f64,
    pub std_residue: f64,
    pub success_pct: f64,
    /// Residue histogram over `[0, histogram_max]`, overflow in the last bin.
    pub histogram: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEval {
    pub mean_residue: f64,
    pub std_residue: f64,
    pub success_pct: f64,
    pub per_grid: Vec<GridPoint>,
    /// Percentage of grid points whose success percentage exceeds each level.
    pub aggregate: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpGridPoint {
    pub grid_index: u64,
    pub phi: f64,
    pub abs_success_pct: f64,
    /// Absent at φ = 0, where the relative residue is undefined.
    pub rel_success_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpEval {
    pub abs_success_pct: f64,
    pub rel_success_pct: f64,
    pub per_grid: Vec<CpGridPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodEval {
    pub params: BTreeMap<String, ParamEval>,
    pub cp: Option<CpEval>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub param: String,
    /// Method expected to have the lower mean residue.
    pub better: EstimatorKind,
    pub worse: EstimatorKind,
    #[serde(flatten)]
    pub test: PairedBootstrap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub records: usize,
    pub mean: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KEval {
    pub k_factor: f64,
    pub records: usize,
    pub methods: BTreeMap<EstimatorKind, MethodEval>,
    pub comparisons: Vec<Comparison>,
    pub audit: Option<AuditSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub schema_version: u32,
    pub family: ChannelFamily,
    pub k: BTreeMap<String, KEval>,
}

fn estimator_for(layout: &RunLayout, family: ChannelFamily, k: f64, kind: EstimatorKind) -> Result<Estimator> {
    Ok(match kind {
        EstimatorKind::Mf => Estimator::mf(family),
        EstimatorKind::Ff => Estimator::ff(family, load_models(layout, family, k, BASELINE)?)?,
        EstimatorKind::AnnFf => Estimator::ann_ff(
            family,
            load_models(layout, family, k, AUTOENCODER)?,
            load_models(layout, family, k, CASCADE)?,
        )?,
    })
}

fn param_eval(config: &ExperimentConfig, records: &[SampleRecord], residues: &[f64], n_grid: usize) -> ParamEval {
    let e = &config.evaluation;
    let cutoff = config.thresholds.residue_cutoff;
    let mut per_grid = Vec::with_capacity(n_grid);
    for g in 0..n_grid as u64 {
        let values: Vec<f64> = records
            .iter()
            .zip(residues)
            .filter(|(r, _)| r.grid_index == g)
            .map(|(_, &v)| v)
            .collect();
        let Some(first) = records.iter().find(|r| r.grid_index == g) else {
            continue;
        };
        let (mean, std) = mean_std(&values);
        per_grid.push(GridPoint {
            grid_index: g,
            params: first.params.clone(),
            mean_residue: mean,
            std_residue: std,
            success_pct: success_pct(&values, cutoff),
            histogram: histogram(&values, e.histogram_bins, e.histogram_max),
        });
    }
    let pcts: Vec<f64> = per_grid.iter().map(|g| g.success_pct).collect();
    let (mean, std) = mean_std(residues);
    ParamEval {
        mean_residue: mean,
        std_residue: std,
        success_pct: success_pct(residues, cutoff),
        aggregate: config
            .thresholds
            .success_levels
            .iter()
            .map(|&l| (l.to_string(), aggregate_rate(&pcts, l)))
            .collect(),
        per_grid,
    }
}

fn cp_eval(config: &ExperimentConfig, records: &[SampleRecord], results: &[EstimationResult], n_grid: usize) -> CpEval {
    let t = &config.thresholds;
    let abs: Vec<f64> = results.iter().map(|r| r.residues.as_ref().expect("truth attached")[0]).collect();
    let rel: Vec<Option<f64>> = results
        .iter()
        .zip(records)
        .map(|(r, rec)| relative_residue(r.estimate[0], rec.params[0]))
        .collect();
    let rel_pct = |idx: &[usize]| {
        let v: Vec<f64> = idx.iter().filter_map(|&i| rel[i]).collect();
        (!v.is_empty()).then(|| success_pct(&v, t.cp_rel_cutoff))
    };
    let all: Vec<usize> = (0..records.len()).collect();
    let per_grid = (0..n_grid as u64)
        .filter_map(|g| {
            let idx: Vec<usize> = all.iter().copied().filter(|&i| records[i].grid_index == g).collect();
            let first = idx.first()?;
            let a: Vec<f64> = idx.iter().map(|&i| abs[i]).collect();
            Some(CpGridPoint {
                grid_index: g,
                phi: records[*first].params[0],
                abs_success_pct: success_pct(&a, t.cp_abs_cutoff),
                rel_success_pct: rel_pct(&idx),
            })
        })
        .collect();
    CpEval {
        abs_success_pct: success_pct(&abs, t.cp_abs_cutoff),
        rel_success_pct: rel_pct(&all).unwrap_or(0.0),
        per_grid,
    }
}

/// Ordered pairs (better, worse) tested for a lower mean residue.
const COMPARISONS: [(EstimatorKind, EstimatorKind); 3] = [
    (EstimatorKind::AnnFf, EstimatorKind::Ff),
    (EstimatorKind::Ff, EstimatorKind::Mf),
    (EstimatorKind::AnnFf, EstimatorKind::Mf),
];

fn evaluate_k(
    config: &ExperimentConfig,
    layout: &RunLayout,
    k: f64,
    methods: &[EstimatorKind],
) -> Result<KEval> {
    let family = config.family;
    let estimators = methods
        .iter()
        .map(|&m| estimator_for(layout, family, k, m))
        .collect::<Result<Vec<_>>>()?;
    let spec = config.eval_spec(k);
    let n_grid = spec.grid.points().map_err(BenchError::from)?.len();
    let data = generate(&spec)?;
    let records = &data.records;
    let noisy: Vec<_> = records.iter().map(|r| &r.noisy).collect();

    let mut all_results: Vec<EstimationResult> = Vec::new();
    let mut residues: BTreeMap<EstimatorKind, Vec<Vec<f64>>> = BTreeMap::new();
    let mut method_evals = BTreeMap::new();
    for est in &estimators {
        let results: Vec<EstimationResult> = est
            .estimate_batch(&noisy)?
            .into_iter()
            .zip(records)
            .map(|(r, rec)| r.with_truth(&rec.params).with_origin(k, rec.seed))
            .collect();
        let per_param: Vec<Vec<f64>> = (0..family.n_params())
            .map(|i| results.iter().map(|r| r.residues.as_ref().expect("truth attached")[i]).collect())
            .collect();
        let params = family
            .param_names()
            .iter()
            .zip(&per_param)
            .map(|(name, res)| (name.to_string(), param_eval(config, records, res, n_grid)))
            .collect();
        let cp = (family == ChannelFamily::Cp).then(|| cp_eval(config, records, &results, n_grid));
        method_evals.insert(est.kind(), MethodEval { params, cp });
        residues.insert(est.kind(), per_param);
        all_results.extend(results);
    }

    let mut comparisons = Vec::new();
    for (better, worse) in COMPARISONS {
        if let (Some(a), Some(b)) = (residues.get(&better), residues.get(&worse)) {
            for (i, name) in family.param_names().iter().enumerate() {
                comparisons.push(Comparison {
                    param: name.to_string(),
                    better,
                    worse,
                    test: paired_bootstrap(
                        &a[i],
                        &b[i],
                        config.evaluation.bootstrap_resamples,
                        config.evaluation.confidence,
                        qpt_core::seed::derive_seed(config.bootstrap_seed(k), &[i as u64]),
                    ),
                });
            }
        }
    }

    let audit = match estimators.iter().find(|e| e.kind() == EstimatorKind::AnnFf) {
        Some(_) => {
            let ae = load_models(layout, family, k, AUTOENCODER)?;
            let ideal: Vec<_> = records.iter().map(|r| &r.ideal).collect();
            let a = denoise_fidelity_audit(&ae, family, &noisy, &ideal)?;
            Some(AuditSummary {
                records: a.fidelities.len(),
                mean: mean_std(&a.fidelities).0,
                q05: a.q05,
                q50: a.q50,
                q95: a.q95,
            })
        }
        None => None,
    };

    let out = BufWriter::new(File::create(layout.eval_records(family, k))?);
    write_results_csv(out, family, &all_results)?;
    Ok(KEval {
        k_factor: k,
        records: records.len(),
        methods: method_evals,
        comparisons,
        audit,
    })
}

fn write_tables(layout: &RunLayout, summary: &EvalSummary) -> Result<()> {
    let dir = layout.eval_dir();
    let mut means = csv_writer(&dir.join("mean_residues.csv"))?;
    means.write_record(["method", "k_factor", "param", "mean_residue", "std_residue", "success_pct"])?;
    let mut rates = csv_writer(&dir.join("success_rates.csv"))?;
    rates.write_record(["method", "k_factor", "param", "level", "grid_success_rate_pct"])?;
    let mut grid = csv_writer(&dir.join("per_grid.csv"))?;
    grid.write_record(["method", "k_factor", "param", "grid_index", "grid_params", "mean_residue", "std_residue", "success_pct"])?;
    let mut hist = csv_writer(&dir.join("histograms.csv"))?;
    hist.write_record(["method", "k_factor", "param", "grid_index", "bin", "count"])?;
    let mut cp = csv_writer(&dir.join("cp_success.csv"))?;
    cp.write_record(["method", "k_factor", "grid_index", "phi", "abs_success_pct", "rel_success_pct"])?;
    let mut audit = csv_writer(&dir.join("audit.csv"))?;
    audit.write_record(["k_factor", "records", "mean", "q05", "q50", "q95"])?;
    let mut tests = csv_writer(&dir.join("comparisons.csv"))?;
    tests.write_record(["k_factor", "param", "better", "worse", "mean_diff", "upper_bound", "confidence", "significant"])?;

    for ke in summary.k.values() {
        let k = ke.k_factor.to_string();
        for (method, me) in &ke.methods {
            let m = method.tag();
            for (param, pe) in &me.params {
                means.write_record([m, &k, param, &pe.mean_residue.to_string(), &pe.std_residue.to_string(), &pe.success_pct.to_string()])?;
                for (level, rate) in &pe.aggregate {
                    rates.write_record([m, &k, param, level, &rate.to_string()])?;
                }
                for g in &pe.per_grid {
                    let gp: Vec<String> = g.params.iter().map(|v| v.to_string()).collect();
                    let gi = g.grid_index.to_string();
                    grid.write_record([m, &k, param, &gi, &gp.join(";"), &g.mean_residue.to_string(), &g.std_residue.to_string(), &g.success_pct.to_string()])?;
                    for (b, c) in g.histogram.iter().enumerate() {
                        hist.write_record([m, &k, param, &gi, &b.to_string(), &c.to_string()])?;
                    }
                }
            }
            if let Some(c) = &me.cp {
                for g in &c.per_grid {
                    let rel = g.rel_success_pct.map(|v| v.to_string()).unwrap_or_default();
                    cp.write_record([m, &k, &g.grid_index.to_string(), &g.phi.to_string(), &g.abs_success_pct.to_string(), &rel])?;
                }
            }
        }
        if let Some(a) = &ke.audit {
            audit.write_record([&k, &a.records.to_string(), &a.mean.to_string(), &a.q05.to_string(), &a.q50.to_string(), &a.q95.to_string()])?;
        }
        for c in &ke.comparisons {
            tests.write_record([
                &k,
                &c.param,
                c.better.tag(),
                c.worse.tag(),
                &c.test.mean_diff.to_string(),
                &c.test.upper_bound.to_string(),
                &c.test.confidence.to_string(),
                &c.test.significant.to_string(),
            ])?;
        }
    }
    for w in [&mut means, &mut rates, &mut grid, &mut hist, &mut cp, &mut audit, &mut tests] {
        w.flush()?;
    }
    Ok(())
}

/// Runs the selected estimators on fresh evaluation records for every
/// selected k. All methods see the same records.
pub fn evaluate(
    config: &ExperimentConfig,
    ks: Option<&[f64]>,
    methods: Option<&[EstimatorKind]>,
) -> Result<EvalSummary> {
    config.validate()?;
    let ks = selected_ks(config, ks)?;
    let methods: Vec<EstimatorKind> = match methods {
        None => config.estimators.clone(),
        Some(m) => m.to_vec(),
    };
    if methods.is_empty() {
        return Err(BenchError::Config("no estimators selected".into()));
    }
    let layout = RunLayout::new(&config.output_dir);
    let _lock = RunLock::acquire(&layout.root)?;
    save_config(config, &layout)?;
    std::fs::create_dir_all(layout.eval_dir())?;
    let mut summary: EvalSummary = std::fs::read(layout.eval_summary())
        .ok()
        .and_then(|b| serde_json::from_slice(&b).ok())
        .filter(|s: &EvalSummary| s.family == config.family && s.schema_version == EVAL_SCHEMA_VERSION)
        .unwrap_or(EvalSummary {
            schema_version: EVAL_SCHEMA_VERSION,
            family: config.family,
            k: BTreeMap::new(),
        });
    for k in ks {
        let ke = evaluate_k(config, &layout, k, &methods)?;
        summary.k.insert(k.to_string(), ke);
    }
    write_json(&layout.eval_summary(), &summary)?;
    write_tables(&layout, &summary)?;
    Ok(summary)
}
