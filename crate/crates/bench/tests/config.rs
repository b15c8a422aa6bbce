mod common;

use qpt_bench::commands::gen_data;
use qpt_bench::{BenchError, ExperimentConfig};
use qpt_pipeline::datasets::{Axis, ParamGrid};
use qpt_pipeline::ChannelFamily;

#[test]
fn defaults_validate_and_round_trip() {
    for family in ChannelFamily::ALL {
        let c = ExperimentConfig::default_for(family);
        c.validate().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }
}

#[test]
fn load_reads_what_to_json_writes() {
    let dir = tempfile::tempdir().unwrap();
    let c = common::tiny_dc(dir.path());
    let path = dir.path().join("c.json");
    std::fs::write(&path, c.to_json()).unwrap();
    assert_eq!(ExperimentConfig::load(&path).unwrap(), c);
}

#[test]
fn zero_step_is_rejected_before_any_file_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut c = common::tiny_dc(&out);
    c.dataset.grid = ParamGrid::Axes {
        axes: vec![Axis { start: 0.0, stop: 1.0, step: 0.0 }],
    };
    let err = gen_data(&c, None).unwrap_err();
    assert!(matches!(err, BenchError::Config(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
    assert!(!out.exists());
}

#[test]
fn invalid_fields_are_config_errors() {
    let base = ExperimentConfig::default_for(ChannelFamily::Gad);
    let mut cases = Vec::new();
    let mut c = base.clone();
    c.k_factors = vec![];
    cases.push(c);
    let mut c = base.clone();
    c.k_factors = vec![-1.0];
    cases.push(c);
    let mut c = base.clone();
    c.dataset.split_ratio = 1.0;
    cases.push(c);
    let mut c = base.clone();
    c.workers = 0;
    cases.push(c);
    let mut c = base.clone();
    c.thresholds.success_levels = vec![1.5];
    cases.push(c);
    let mut c = base.clone();
    c.estimators.clear();
    cases.push(c);
    let mut c = base.clone();
    c.training.feed_forward.batch_size = 0;
    cases.push(c);
    let mut c = base.clone();
    c.evaluation.instances = 0;
    cases.push(c);
    for c in cases {
        assert!(matches!(c.validate(), Err(BenchError::Config(_))));
    }
}

#[test]
fn malformed_json_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, "{\"family\": \"dc\"").unwrap();
    assert!(matches!(ExperimentConfig::load(&path), Err(BenchError::Config(_))));
    assert!(matches!(ExperimentConfig::load(dir.path().join("missing.json")), Err(BenchError::Config(_))));
}

#[test]
fn seed_domains_are_distinct_and_stable() {
    let c = ExperimentConfig::default_for(ChannelFamily::Dc);
    let seeds = [
        c.train_spec(0.1).master_seed,
        c.eval_spec(0.1).master_seed,
        c.train_spec(1.0).master_seed,
        c.split_seed(0.1),
        c.fit_seed(0.1),
        c.bootstrap_seed(0.1),
        c.parasitic_seed(),
    ];
    let unique: std::collections::BTreeSet<_> = seeds.iter().collect();
    assert_eq!(unique.len(), seeds.len());
    assert_eq!(c.clone().train_spec(0.1).master_seed, seeds[0]);
    let mut other = c.clone();
    other.master_seed += 1;
    assert_ne!(other.train_spec(0.1).master_seed, seeds[0]);
}

#[test]
fn shipped_configs_are_the_defaults() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for family in ChannelFamily::ALL {
        let loaded = ExperimentConfig::load(dir.join(format!("{family}.json"))).unwrap();
        let mut expected = ExperimentConfig::default_for(family);
        expected.output_dir = format!("runs/{family}").into();
        assert_eq!(loaded, expected);
    }
}
