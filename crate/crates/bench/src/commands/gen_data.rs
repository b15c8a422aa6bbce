use std::collections::BTreeMap;

use qpt_pipeline::datasets::{generate, save_dataset};
use serde::{Deserialize, Serialize};

use super::{save_config, selected_ks, write_json, RunLock};
use crate::config::{ExperimentConfig, RunLayout};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub k_factor: f64,
    pub records: u64,
    pub skipped: u64,
    /// CRC-32 of the whole file.
    pub file_crc32: u32,
}

/// Dataset files of a run keyed by file name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DataManifest {
    pub files: BTreeMap<String, ManifestEntry>,
}

/// Generates and stores one training corpus per k.
pub fn gen_data(config: &ExperimentConfig, ks: Option<&[f64]>) -> Result<DataManifest> {
    config.validate()?;
    let ks = selected_ks(config, ks)?;
    let layout = RunLayout::new(&config.output_dir);
    let _lock = RunLock::acquire(&layout.root)?;
    save_config(config, &layout)?;
    std::fs::create_dir_all(layout.data_dir())?;
    let mut manifest: DataManifest = std::fs::read(layout.data_manifest())
        .ok()
        .and_then(|b| serde_json::from_slice(&b).ok())
        .unwrap_or_default();
    for k in ks {
        let data = generate(&config.train_spec(k))?;
        let path = layout.dataset(config.family, k);
        save_dataset(&path, &data)?;
        let name = path.file_name().expect("dataset file name").to_string_lossy().into_owned();
        manifest.files.insert(
            name,
            ManifestEntry {
                k_factor: k,
                records: data.records.len() as u64,
                skipped: data.skipped,
                file_crc32: crc32fast::hash(&std::fs::read(&path)?),
            },
        );
    }
    write_json(&layout.data_manifest(), &manifest)?;
    Ok(manifest)
}
