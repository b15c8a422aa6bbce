use std::collections::BTreeMap;
use std::path::Path;

use qpt_nn::{load_model, save_model, Network, TrainReport};
use qpt_pipeline::datasets::{load_dataset, split};
use qpt_pipeline::{train_models, ChannelFamily};
use serde::{Deserialize, Serialize};

use super::{csv_writer, save_config, selected_ks, write_json, RunLock};
use crate::config::{ExperimentConfig, RunLayout};
use crate::error::{BenchError, Result};

pub const AUTOENCODER: &str = "autoencoder";
pub const CASCADE: &str = "cascade";
pub const BASELINE: &str = "baseline";

/// Training reports of the three networks trained for one k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReports {
    pub train_records: usize,
    pub val_records: usize,
    pub stages: BTreeMap<String, TrainReport>,
}

fn write_loss_curve(path: &Path, report: &TrainReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["epoch", "train_loss", "val_loss"])?;
    for (i, (t, v)) in report.train_loss.iter().zip(&report.val_loss).enumerate() {
        w.write_record([(i + 1).to_string(), t.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Trains autoencoder, cascade head and baseline head for every selected k.
pub fn train(config: &ExperimentConfig, ks: Option<&[f64]>) -> Result<BTreeMap<String, StageReports>> {
    config.validate()?;
    let ks = selected_ks(config, ks)?;
    let layout = RunLayout::new(&config.output_dir);
    let _lock = RunLock::acquire(&layout.root)?;
    save_config(config, &layout)?;
    let mut summary: BTreeMap<String, StageReports> = std::fs::read(layout.training_summary())
        .ok()
        .and_then(|b| serde_json::from_slice(&b).ok())
        .unwrap_or_default();
    let family = config.family;
    for k in ks {
        let path = layout.dataset(family, k);
        if !path.exists() {
            return Err(BenchError::Data(format!("missing dataset {} (run gen-data first)", path.display())));
        }
        let data = load_dataset(&path)?;
        if data.spec != config.train_spec(k) {
            return Err(BenchError::Data(format!("{} was generated from a different config", path.display())));
        }
        let (train_set, val_set) = split(&data.records, config.dataset.split_ratio, config.split_seed(k))?;
        let models = train_models(family, &train_set, &val_set, &config.training, config.fit_seed(k))?;
        std::fs::create_dir_all(layout.model_dir())?;
        let mut stages = BTreeMap::new();
        for (stage, net, report) in [
            (AUTOENCODER, &models.autoencoder, &models.autoencoder_report),
            (CASCADE, &models.cascade_head, &models.cascade_report),
            (BASELINE, &models.baseline_head, &models.baseline_report),
        ] {
            save_model(net, layout.model(family, k, stage))?;
            write_loss_curve(&layout.loss_curve(family, k, stage), report)?;
            stages.insert(stage.to_string(), report.clone());
        }
        summary.insert(
            k.to_string(),
            StageReports {
                train_records: train_set.len(),
                val_records: val_set.len(),
                stages,
            },
        );
    }
    write_json(&layout.training_summary(), &summary)?;
    Ok(summary)
}

/// Loads one trained network; a missing file is a data error naming the stage.
pub fn load_models(layout: &RunLayout, family: ChannelFamily, k: f64, stage: &str) -> Result<Network> {
    let path = layout.model(family, k, stage);
    if !path.exists() {
        return Err(BenchError::Data(format!(
            "missing {stage} model for {family} at k = {k} ({}); run train first",
            path.display()
        )));
    }
    Ok(load_model(&path)?)
}
