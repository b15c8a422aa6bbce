use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::{write_json, RunLock};
use crate::config::{ExperimentConfig, RunLayout};
use crate::error::{BenchError, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn read_json(path: &Path) -> Result<Option<Value>> {
    match std::fs::read(path) {
        Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes).map_err(|e| {
            BenchError::Data(format!("{}: {e}", path.display()))
        })?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Merges every summary of a run directory into `report/report.json` and
/// copies the headline tables next to it. Missing stages are listed as absent
/// rather than failing. The output depends only on the run directory
/// contents, so regenerating it is byte-identical.
pub fn report(run_dir: &Path) -> Result<PathBuf> {
    let layout = RunLayout::new(run_dir);
    let _lock = RunLock::acquire(&layout.root)?;
    let config_value = read_json(&layout.config())?
        .ok_or_else(|| BenchError::Config(format!("{} has no config.json", run_dir.display())))?;
    let mut config: ExperimentConfig = serde_json::from_value(config_value)
        .map_err(|e| BenchError::Config(format!("config.json: {e}")))?;
    // The location of a run is not part of its result.
    config.output_dir = PathBuf::new();

    let sections = [
        ("gen_data", layout.data_manifest()),
        ("training", layout.training_summary()),
        ("evaluation", layout.eval_summary()),
        ("parasitic", layout.parasitic_dir().join("summary.json")),
    ];
    let mut merged = BTreeMap::new();
    let mut absent = Vec::new();
    for (name, path) in &sections {
        match read_json(path)? {
            Some(v) => {
                merged.insert(name.to_string(), v);
            }
            None => {
                absent.push(name.to_string());
                merged.insert(name.to_string(), Value::Null);
            }
        }
    }
    let mut missing_methods = Vec::new();
    if let Some(eval) = merged.get("evaluation").and_then(|v| v.get("k")).and_then(Value::as_object) {
        for (k, ke) in eval {
            for m in &config.estimators {
                if ke.get("methods").and_then(|ms| ms.get(m.tag())).is_none() {
                    missing_methods.push(format!("{}@k={k}", m.tag()));
                }
            }
        }
    }
    let seeds: BTreeMap<String, u64> = config
        .k_factors
        .iter()
        .flat_map(|&k| {
            [
                (format!("train_data_k{k}"), config.train_spec(k).master_seed),
                (format!("eval_data_k{k}"), config.eval_spec(k).master_seed),
                (format!("fit_k{k}"), config.fit_seed(k)),
            ]
        })
        .chain([("master".to_string(), config.master_seed), ("parasitic".to_string(), config.parasitic_seed())])
        .collect();

    let report = json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "code_version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "seeds": seeds,
        "partial": !absent.is_empty() || !missing_methods.is_empty(),
        "absent_sections": absent,
        "absent_methods": missing_methods,
        "sections": merged,
    });
    let dir = layout.report_dir();
    std::fs::create_dir_all(&dir)?;
    let out = dir.join("report.json");
    write_json(&out, &report)?;
    for table in ["mean_residues.csv", "success_rates.csv", "cp_success.csv", "audit.csv", "comparisons.csv"] {
        let src = layout.eval_dir().join(table);
        if src.exists() {
            std::fs::copy(&src, dir.join(table))?;
        }
    }
    let parasitic = layout.parasitic_dir().join("summary.csv");
    if parasitic.exists() {
        std::fs::copy(&parasitic, dir.join("parasitic_summary.csv"))?;
    }
    Ok(out)
}
