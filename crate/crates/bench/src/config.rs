use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use qpt_core::seed::{derive_seed, label_coord};
use qpt_core::tomography::DEFAULT_N_BASE;
use qpt_pipeline::datasets::{DatasetSpec, ParamGrid};
use qpt_pipeline::{ChannelFamily, EstimatorKind, TrainingPlan};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPlan {
    pub grid: ParamGrid,
    pub instances: usize,
    pub n_base: f64,
    pub split_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPlan {
    pub grid: ParamGrid,
    /// Evaluation records per grid point.
    pub instances: usize,
    pub histogram_bins: usize,
    /// Upper edge of the residue histograms; larger residues land in the last bin.
    pub histogram_max: f64,
    pub bootstrap_resamples: usize,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// A record succeeds on a parameter when its residue is at most this.
    pub residue_cutoff: f64,
    /// Aggregate rates count grid points whose success fraction exceeds each level.
    pub success_levels: Vec<f64>,
    pub cp_abs_cutoff: f64,
    pub cp_rel_cutoff: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            residue_cutoff: 0.1,
            success_levels: vec![0.90, 0.95, 0.99],
            cp_abs_cutoff: PI / 24.0,
            cp_rel_cutoff: 0.03,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParasiticPlan {
    pub p_exp: Vec<f64>,
    pub k_factors: Vec<f64>,
    pub repetitions: usize,
    /// Relative spread of the Dirichlet jitter on the Pauli probabilities.
    pub jitter: f64,
}

impl Default for ParasiticPlan {
    fn default() -> Self {
        Self {
            p_exp: vec![0.09, 0.3, 0.64, 1.0],
            k_factors: vec![0.025, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0],
            repetitions: 300,
            jitter: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: ChannelFamily,
    pub k_factors: Vec<f64>,
    pub dataset: DataPlan,
    pub training: TrainingPlan,
    pub estimators: Vec<EstimatorKind>,
    pub evaluation: EvalPlan,
    pub thresholds: Thresholds,
    pub parasitic: ParasiticPlan,
    pub output_dir: PathBuf,
    pub master_seed: u64,
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn default_for(family: ChannelFamily) -> Self {
        let data = DatasetSpec::default_for(family, 1.0, 0);
        Self {
            family,
            k_factors: vec![0.1, 0.5, 1.0],
            dataset: DataPlan {
                grid: data.grid.clone(),
                instances: data.instances,
                n_base: DEFAULT_N_BASE,
                split_ratio: 0.8,
            },
            training: TrainingPlan {
                augment_dc: family == ChannelFamily::Dc,
                ..TrainingPlan::default()
            },
            estimators: EstimatorKind::ALL.to_vec(),
            evaluation: EvalPlan {
                grid: data.grid,
                instances: match family {
                    ChannelFamily::Dc => 300,
                    ChannelFamily::Gad => 100,
                    ChannelFamily::Cp => 500,
                },
                histogram_bins: 20,
                histogram_max: match family {
                    ChannelFamily::Cp => PI / 4.0,
                    _ => 0.2,
                },
                bootstrap_resamples: 2000,
                confidence: 0.95,
            },
            thresholds: Thresholds::default(),
            parasitic: ParasiticPlan::default(),
            output_dir: PathBuf::from("run"),
            master_seed: 2024,
            workers: 1,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: Self = serde_json::from_str(&text)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let unit_open = |v: f64| v > 0.0 && v < 1.0;
        if self.k_factors.is_empty() || !self.k_factors.iter().all(|&k| positive(k)) {
            return bad(format!("k_factors {:?} must be non-empty and positive", self.k_factors));
        }
        if self.estimators.is_empty() {
            return bad("no estimators selected".into());
        }
        if !unit_open(self.dataset.split_ratio) {
            return bad(format!("split_ratio {} outside (0,1)", self.dataset.split_ratio));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        let t = &self.thresholds;
        if !unit_open(t.residue_cutoff) || !unit_open(t.cp_rel_cutoff) {
            return bad("residue and relative cutoffs must lie in (0,1)".into());
        }
        if !(t.cp_abs_cutoff > 0.0 && t.cp_abs_cutoff < PI) {
            return bad(format!("cp_abs_cutoff {} outside (0,π)", t.cp_abs_cutoff));
        }
        if t.success_levels.is_empty() || !t.success_levels.iter().all(|&l| unit_open(l)) {
            return bad(format!("success levels {:?} must lie in (0,1)", t.success_levels));
        }
        let e = &self.evaluation;
        if e.instances == 0 || e.histogram_bins == 0 || !positive(e.histogram_max) {
            return bad("evaluation needs instances, histogram bins and a positive histogram range".into());
        }
        if e.bootstrap_resamples < 100 || !unit_open(e.confidence) {
            return bad("bootstrap needs ≥ 100 resamples and a confidence in (0,1)".into());
        }
        let p = &self.parasitic;
        if !p.p_exp.iter().all(|v| (0.0..=1.0).contains(v))
            || !p.k_factors.iter().all(|&k| positive(k))
            || p.repetitions == 0
            || !(0.0..1.0).contains(&p.jitter)
        {
            return bad("parasitic plan needs p_exp in [0,1], positive k, repetitions ≥ 1, jitter in [0,1)".into());
        }
        self.training.autoencoder.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        self.training.feed_forward.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        for k in &self.k_factors {
            self.train_spec(*k).validate()?;
            self.eval_spec(*k).validate()?;
        }
        Ok(())
    }

    fn coords(&self, domain: &str, k: f64) -> u64 {
        derive_seed(
            self.master_seed,
            &[label_coord(domain), label_coord(self.family.tag()), k.to_bits()],
        )
    }

    pub fn train_spec(&self, k: f64) -> DatasetSpec {
        DatasetSpec {
            family: self.family,
            grid: self.dataset.grid.clone(),
            instances: self.dataset.instances,
            k_factor: k,
            n_base: self.dataset.n_base,
            master_seed: self.coords("train-data", k),
            augmented: false,
        }
    }

    /// Evaluation records come from a seed domain disjoint from training.
    pub fn eval_spec(&self, k: f64) -> DatasetSpec {
        DatasetSpec {
            family: self.family,
            grid: self.evaluation.grid.clone(),
            instances: self.evaluation.instances,
            k_factor: k,
            n_base: self.dataset.n_base,
            master_seed: self.coords("eval-data", k),
            augmented: false,
        }
    }

    pub fn split_seed(&self, k: f64) -> u64 {
        self.coords("split", k)
    }

    pub fn fit_seed(&self, k: f64) -> u64 {
        self.coords("fit", k)
    }

    pub fn bootstrap_seed(&self, k: f64) -> u64 {
        self.coords("bootstrap", k)
    }

    pub fn parasitic_seed(&self) -> u64 {
        self.coords("parasitic", 0.0)
    }
}

/// Files of a run directory.
#[derive(Clone, Debug)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn stem(family: ChannelFamily, k: f64) -> String {
        format!("{family}_k{k}")
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn data_dir(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn dataset(&self, family: ChannelFamily, k: f64) -> PathBuf {
        self.data_dir().join(format!("{}.qds", Self::stem(family, k)))
    }

    pub fn data_manifest(&self) -> PathBuf {
        self.data_dir().join("manifest.json")
    }

    pub fn model_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn model(&self, family: ChannelFamily, k: f64, stage: &str) -> PathBuf {
        self.model_dir().join(format!("{}_{stage}.qnn", Self::stem(family, k)))
    }

    pub fn training_dir(&self) -> PathBuf {
        self.root.join("training")
    }

    pub fn loss_curve(&self, family: ChannelFamily, k: f64, stage: &str) -> PathBuf {
        self.training_dir().join(format!("{}_{stage}_loss.csv", Self::stem(family, k)))
    }

    pub fn training_summary(&self) -> PathBuf {
        self.training_dir().join("summary.json")
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.root.join("eval")
    }

    pub fn eval_records(&self, family: ChannelFamily, k: f64) -> PathBuf {
        self.eval_dir().join(format!("{}_records.csv", Self::stem(family, k)))
    }

    pub fn eval_summary(&self) -> PathBuf {
        self.eval_dir().join("summary.json")
    }

    pub fn parasitic_dir(&self) -> PathBuf {
        self.root.join("parasitic")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
}
