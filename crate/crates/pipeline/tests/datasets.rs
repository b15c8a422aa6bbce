use std::collections::{BTreeMap, HashSet};
use std::fs::OpenOptions;
use std::io::{Seek, SeekFrom, Write};

use qpt_core::ProcessMatrix;
use qpt_pipeline::datasets::{
    generate, load_dataset, read_header, regenerate, save_dataset, split, Axis, DatasetReader,
    DatasetSpec, ParamGrid, SampleRecord,
};
use qpt_pipeline::{ChannelFamily, PipelineError};

fn small_spec(family: ChannelFamily, instances: usize) -> DatasetSpec {
    let grid = match family {
        ChannelFamily::Dc => ParamGrid::Axes { axes: vec![Axis::new(0.1, 0.9, 0.2)] },
        ChannelFamily::Gad => ParamGrid::Axes {
            axes: vec![Axis::new(0.0, 1.0, 0.5), Axis::new(0.2, 0.6, 0.4)],
        },
        ChannelFamily::Cp => ParamGrid::Points { points: vec![vec![0.5], vec![2.0]] },
    };
    DatasetSpec {
        grid,
        instances,
        ..DatasetSpec::default_for(family, 0.5, 77)
    }
}

#[test]
fn default_grid_sizes() {
    let dc = DatasetSpec::default_for(ChannelFamily::Dc, 0.1, 1);
    let points = dc.validate().unwrap();
    assert_eq!(points.len() * dc.instances, 2000);
    assert_eq!(points[5], vec![0.3]);
    assert_eq!(points[19], vec![1.0]);
    let gad = DatasetSpec::default_for(ChannelFamily::Gad, 0.1, 1);
    assert_eq!(gad.validate().unwrap().len() * gad.instances, 60500);
    let cp = DatasetSpec::default_for(ChannelFamily::Cp, 0.1, 1);
    let angles = cp.validate().unwrap();
    assert_eq!(angles.len() * cp.instances, 8000);
    assert!((angles[12][0] - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
}

#[test]
fn default_dc_generation_and_augmentation_counts() {
    let spec = DatasetSpec::default_for(ChannelFamily::Dc, 0.1, 3);
    let data = generate(&spec).unwrap();
    assert_eq!(data.records.len(), 2000);
    assert_eq!(data.skipped, 0);
    let (train, val) = split(&data.records, 0.8, 9).unwrap();
    assert_eq!((train.len(), val.len()), (1600, 400));
    let augmented = generate(&DatasetSpec { augmented: true, ..spec }).unwrap();
    assert_eq!(augmented.records.len(), 10000);
    assert!(augmented.records.iter().all(|r| (1..=5).contains(&r.view)));
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = small_spec(ChannelFamily::Dc, 2);
    spec.grid = ParamGrid::Axes { axes: vec![Axis::new(0.0, 1.0, 0.0)] };
    assert!(matches!(generate(&spec), Err(PipelineError::InvalidSpec(_))));
    spec.grid = ParamGrid::Axes { axes: vec![Axis::new(0.5, 1.5, 0.5)] };
    assert!(matches!(generate(&spec), Err(PipelineError::InvalidSpec(_))));
    let augmented_gad = DatasetSpec { augmented: true, ..small_spec(ChannelFamily::Gad, 2) };
    assert!(generate(&augmented_gad).is_err());
    let zero = DatasetSpec { instances: 0, ..small_spec(ChannelFamily::Cp, 2) };
    assert!(generate(&zero).is_err());
}

#[test]
fn records_are_regenerable_and_physical() {
    for family in ChannelFamily::ALL {
        let spec = small_spec(family, 3);
        let data = generate(&spec).unwrap();
        for r in &data.records {
            let (noisy, ideal) = regenerate(family, &r.params, r.k_factor, spec.n_base, r.seed).unwrap();
            assert_eq!(noisy.matrix(), &r.noisy);
            assert_eq!(ideal.matrix(), &r.ideal);
            let pm = ProcessMatrix::new(family.n_qubits(), r.ideal.clone()).unwrap();
            assert!(pm.matrix().is_hermitian(1e-10));
            assert!((pm.matrix().trace().re - 1.0).abs() < 1e-10);
            assert!(pm.matrix().min_eigenvalue() >= -1e-10);
        }
    }
}

#[test]
fn parallel_generation_matches_serial() {
    let spec = small_spec(ChannelFamily::Gad, 4);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| generate(&spec).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn split_is_stratified_disjoint_and_deterministic() {
    let data = generate(&small_spec(ChannelFamily::Dc, 7)).unwrap();
    let (train, val) = split(&data.records, 0.8, 5).unwrap();
    assert_eq!(split(&data.records, 0.8, 5).unwrap(), (train.clone(), val.clone()));
    let key = |r: &SampleRecord| (r.grid_index, r.instance);
    let t: HashSet<_> = train.iter().map(key).collect();
    let v: HashSet<_> = val.iter().map(key).collect();
    assert!(t.is_disjoint(&v));
    assert_eq!(t.len() + v.len(), data.records.len());
    let mut per_grid: BTreeMap<u64, usize> = BTreeMap::new();
    for r in &train {
        *per_grid.entry(r.grid_index).or_default() += 1;
    }
    assert_eq!(per_grid.len(), 5);
    for &count in per_grid.values() {
        assert!((count as f64 - 0.8 * 7.0).abs() <= 1.0);
    }
    let single = generate(&small_spec(ChannelFamily::Cp, 1)).unwrap();
    assert!(matches!(
        split(&single.records, 0.8, 1),
        Err(PipelineError::Stratify { count: 1, .. })
    ));
    assert!(split(&data.records, 1.0, 1).is_err());
}

#[test]
fn container_round_trip_and_header() {
    let dir = tempfile::tempdir().unwrap();
    for family in ChannelFamily::ALL {
        let data = generate(&small_spec(family, 2)).unwrap();
        let path = dir.path().join(format!("{family}.qds"));
        save_dataset(&path, &data).unwrap();
        let header = read_header(&path).unwrap();
        assert_eq!(header.record_count, data.records.len() as u64);
        assert_eq!(header.spec, data.spec);
        assert_eq!(header.skipped_count, 0);
        assert_eq!(load_dataset(&path).unwrap(), data);
        let mut reader = DatasetReader::open(&path).unwrap();
        assert_eq!(reader.next().unwrap().unwrap(), data.records[0]);
    }
}

#[test]
fn container_rejects_damage() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&small_spec(ChannelFamily::Dc, 3)).unwrap();
    let path = dir.path().join("dc.qds");
    save_dataset(&path, &data).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let header_len = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
    let rb = read_header(&path).unwrap().record_bytes as usize;

    // Cut in the middle of record 4.
    let cut = dir.path().join("cut.qds");
    std::fs::write(&cut, &bytes[..header_len + 4 * rb + rb / 2]).unwrap();
    assert!(matches!(DatasetReader::open(&cut), Err(PipelineError::Truncated { record: 4 })));

    // Flip one bit inside record 2.
    let flipped = dir.path().join("flip.qds");
    let mut damaged = bytes.clone();
    damaged[header_len + 2 * rb + 40] ^= 1;
    std::fs::write(&flipped, &damaged).unwrap();
    let results: Vec<_> = DatasetReader::open(&flipped).unwrap().collect();
    assert!(results[..2].iter().all(|r| r.is_ok()));
    assert!(matches!(results[2], Err(PipelineError::Checksum { record: 2 })));

    // Footer disagreeing with the header.
    let footer = dir.path().join("footer.qds");
    std::fs::write(&footer, &bytes).unwrap();
    let mut f = OpenOptions::new().write(true).open(&footer).unwrap();
    f.seek(SeekFrom::End(-8)).unwrap();
    f.write_all(&99u64.to_le_bytes()).unwrap();
    drop(f);
    assert!(matches!(
        DatasetReader::open(&footer),
        Err(PipelineError::CountMismatch { header: 15, found: 99 })
    ));

    let garbage = dir.path().join("garbage.qds");
    std::fs::write(&garbage, b"not a dataset").unwrap();
    assert!(matches!(read_header(&garbage), Err(PipelineError::Header(_))));
}

#[test]
fn saving_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(ChannelFamily::Cp, 2);
    let a = dir.path().join("a.qds");
    let b = dir.path().join("b.qds");
    save_dataset(&a, &generate(&spec).unwrap()).unwrap();
    save_dataset(&b, &generate(&spec).unwrap()).unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert!(!dir.path().join("a.qds.partial").exists());
}
