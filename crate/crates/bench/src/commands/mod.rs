//! The five subcommands. Each takes a validated config and works inside its
//! run directory under an exclusive lock file.

mod evaluate;
mod gen_data;
mod parasitic;
mod report;
mod train;

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use evaluate::{evaluate, AuditSummary, Comparison, EvalSummary, GridPoint, KEval, MethodEval, ParamEval};
pub use gen_data::{gen_data, DataManifest, ManifestEntry};
pub use parasitic::{jittered_probabilities, parasitic, ParasiticSummary};
pub use report::{report, REPORT_SCHEMA_VERSION};
pub use train::{load_models, train, StageReports};

use crate::config::{ExperimentConfig, RunLayout};
use crate::error::{BenchError, Result};

/// Exclusive marker for a run directory, removed on drop.
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(BenchError::Data(format!(
                "{} is locked by another command (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Selects the k values to process: the override list, or all configured ones.
pub(crate) fn selected_ks(config: &ExperimentConfig, ks: Option<&[f64]>) -> Result<Vec<f64>> {
    match ks {
        None => Ok(config.k_factors.clone()),
        Some(list) => {
            for k in list {
                if !config.k_factors.contains(k) {
                    return Err(BenchError::Config(format!(
                        "k = {k} is not among the configured k_factors {:?}",
                        config.k_factors
                    )));
                }
            }
            Ok(list.to_vec())
        }
    }
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

pub(crate) fn save_config(config: &ExperimentConfig, layout: &RunLayout) -> Result<()> {
    write_json(&layout.config(), config)
}
