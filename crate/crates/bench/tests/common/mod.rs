#![allow(dead_code)]

use std::path::Path;

use qpt_bench::ExperimentConfig;
use qpt_pipeline::datasets::{Axis, ParamGrid};
use qpt_pipeline::ChannelFamily;

/// A depolarizing experiment small enough to run end to end in seconds.
pub fn tiny_dc(out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::default_for(ChannelFamily::Dc);
    let grid = ParamGrid::Axes {
        axes: vec![Axis { start: 0.0, stop: 0.6, step: 0.2 }],
    };
    c.k_factors = vec![0.1];
    c.dataset.grid = grid.clone();
    c.dataset.instances = 10;
    c.evaluation.grid = grid;
    c.evaluation.instances = 6;
    c.evaluation.bootstrap_resamples = 200;
    c.training.autoencoder.max_epochs = 2;
    c.training.feed_forward.max_epochs = 2;
    c.parasitic.p_exp = vec![0.3];
    c.parasitic.k_factors = vec![0.1];
    c.parasitic.repetitions = 3;
    c.output_dir = out.to_path_buf();
    c
}
