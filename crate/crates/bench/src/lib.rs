//! Benchmark harness comparing the maximum-fidelity, feed-forward and
//! autoencoder-cascade estimators on simulated tomography data.
//!
//! A run lives in one directory: `gen-data` writes the training corpora,
//! `train` the networks and loss curves, `evaluate` per-record residues and
//! summary tables, `parasitic` the anisotropic-noise robustness study and
//! `report` a consolidated JSON bundle. Every number is a function of the
//! config and its master seed.

pub mod commands;
pub mod config;
mod error;
pub mod metrics;

pub use config::{DataPlan, EvalPlan, ExperimentConfig, ParasiticPlan, RunLayout, Thresholds};
pub use error::{BenchError, Result};

/// Runs `f` on a dedicated rayon pool with `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| BenchError::Config(format!("cannot start {workers} worker(s): {e}")))?;
    pool.install(f)
}
