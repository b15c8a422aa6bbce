//! Simulated tomography corpora: grids, generation, stratified splits and the
//! on-disk container.

mod container;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use qpt_core::seed::derive_seed;
use qpt_core::tomography::{simulate_noisy_chi, DEFAULT_N_BASE};
use qpt_core::{ideal_chi, ComplexMatrix, ProcessMatrix};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::family::ChannelFamily;
use crate::features::augment_dc;

pub use container::{load_dataset, read_header, save_dataset, DatasetHeader, DatasetReader, DatasetWriter};

/// Failed reconstructions are retried this many times with fresh seeds.
pub const MAX_RETRIES: u64 = 3;

/// One evenly spaced axis, endpoints included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Axis {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        Self { start, stop, step }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(PipelineError::InvalidSpec(format!("axis step {} must be positive", self.step)));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.stop >= self.start) {
            return Err(PipelineError::InvalidSpec(format!(
                "axis [{}, {}] is empty or not finite",
                self.start, self.stop
            )));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        // Snapping to 12 decimals turns 0.1 + 2·0.1 into the literal 0.3.
        Ok((0..n)
            .map(|i| ((self.start + i as f64 * self.step) * 1e12).round() / 1e12)
            .collect())
    }
}

/// Angle `numerator·π / denominator`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiFraction {
    pub numerator: u32,
    pub denominator: u32,
}

/// Parameter grid of a dataset. Grid indices follow the listed order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamGrid {
    /// Cartesian product of the axes, first axis outermost.
    Axes { axes: Vec<Axis> },
    /// Single-parameter angles given as fractions of π.
    PiFractions { angles: Vec<PiFraction> },
    /// Explicit parameter tuples.
    Points { points: Vec<Vec<f64>> },
}

impl ParamGrid {
    pub fn points(&self) -> Result<Vec<Vec<f64>>> {
        match self {
            ParamGrid::Axes { axes } => {
                let mut points = vec![Vec::new()];
                for axis in axes {
                    let values = axis.values()?;
                    points = points
                        .into_iter()
                        .flat_map(|prefix: Vec<f64>| {
                            values.iter().map(move |&v| {
                                let mut p = prefix.clone();
                                p.push(v);
                                p
                            })
                        })
                        .collect();
                }
                Ok(points)
            }
            ParamGrid::PiFractions { angles } => angles
                .iter()
                .map(|a| {
                    if a.denominator == 0 {
                        return Err(PipelineError::InvalidSpec("π fraction with zero denominator".into()));
                    }
                    Ok(vec![a.numerator as f64 * PI / a.denominator as f64])
                })
                .collect(),
            ParamGrid::Points { points } => Ok(points.clone()),
        }
    }

    /// The default grid of each family: DC p ∈ [0.05, 1] step 0.05; GAD
    /// η, γ ∈ [0, 1] step 0.1; CP φ = m·π/6 (m = 0..11) and m·π/4 (m = 1, 3, 5, 7).
    pub fn default_for(family: ChannelFamily) -> Self {
        match family {
            ChannelFamily::Dc => ParamGrid::Axes {
                axes: vec![Axis::new(0.05, 1.0, 0.05)],
            },
            ChannelFamily::Gad => ParamGrid::Axes {
                axes: vec![Axis::new(0.0, 1.0, 0.1), Axis::new(0.0, 1.0, 0.1)],
            },
            ChannelFamily::Cp => {
                let sixths = (0..12).map(|m| PiFraction { numerator: m, denominator: 6 });
                let quarters = [1, 3, 5, 7].map(|m| PiFraction { numerator: m, denominator: 4 });
                ParamGrid::PiFractions {
                    angles: sixths.chain(quarters).collect(),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub family: ChannelFamily,
    pub grid: ParamGrid,
    pub instances: usize,
    pub k_factor: f64,
    pub n_base: f64,
    pub master_seed: u64,
    /// Expand every record into its five block-permuted views (DC only).
    pub augmented: bool,
}

impl DatasetSpec {
    /// Default grid and instance count for a family at signal level `k_factor`.
    pub fn default_for(family: ChannelFamily, k_factor: f64, master_seed: u64) -> Self {
        Self {
            family,
            grid: ParamGrid::default_for(family),
            instances: match family {
                ChannelFamily::Dc => 100,
                _ => 500,
            },
            k_factor,
            n_base: DEFAULT_N_BASE,
            master_seed,
            augmented: false,
        }
    }

    /// Checks the spec and returns its grid points.
    pub fn validate(&self) -> Result<Vec<Vec<f64>>> {
        if self.instances == 0 {
            return Err(PipelineError::InvalidSpec("instances must be at least 1".into()));
        }
        for (name, v) in [("k_factor", self.k_factor), ("n_base", self.n_base)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(PipelineError::InvalidSpec(format!("{name} = {v} must be positive")));
            }
        }
        if self.augmented && self.family != ChannelFamily::Dc {
            return Err(PipelineError::InvalidSpec(format!(
                "augmentation is defined for dc only, not {}",
                self.family
            )));
        }
        let points = self.grid.points()?;
        if points.is_empty() {
            return Err(PipelineError::InvalidSpec("empty parameter grid".into()));
        }
        for p in &points {
            self.family
                .spec(p)
                .map_err(|e| PipelineError::InvalidSpec(format!("grid point {p:?}: {e}")))?;
        }
        Ok(points)
    }
}

/// One simulated tomography run and its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub grid_index: u64,
    pub instance: u64,
    /// 0 for the simulated matrix, 1–5 for block-permuted copies.
    pub view: u64,
    /// Seed that produced the counts (after any retries).
    pub seed: u64,
    pub k_factor: f64,
    pub params: Vec<f64>,
    pub noisy: ComplexMatrix,
    pub ideal: ComplexMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub skipped: u64,
    pub records: Vec<SampleRecord>,
}

/// Re-runs the simulation for stored record coordinates.
pub fn regenerate(
    family: ChannelFamily,
    params: &[f64],
    k_factor: f64,
    n_base: f64,
    seed: u64,
) -> Result<(ProcessMatrix, ProcessMatrix)> {
    Ok(simulate_noisy_chi(&family.spec(params)?, k_factor, n_base, seed)?)
}

fn simulate_with_retries(spec: &DatasetSpec, point: &[f64], grid_index: u64, instance: u64) -> Result<Option<SampleRecord>> {
    let channel = spec.family.spec(point)?;
    let ideal = ideal_chi(&channel)?.into_matrix();
    for attempt in 0..=MAX_RETRIES {
        let seed = if attempt == 0 {
            derive_seed(spec.master_seed, &[grid_index, instance])
        } else {
            derive_seed(spec.master_seed, &[grid_index, instance, attempt])
        };
        if let Ok((noisy, _)) = simulate_noisy_chi(&channel, spec.k_factor, spec.n_base, seed) {
            return Ok(Some(SampleRecord {
                grid_index,
                instance,
                view: 0,
                seed,
                k_factor: spec.k_factor,
                params: point.to_vec(),
                noisy: noisy.into_matrix(),
                ideal,
            }));
        }
    }
    Ok(None)
}

/// Simulates one record per grid point and instance, in grid-major order.
/// Work is spread over the current rayon pool; the result does not depend on
/// the number of workers.
pub fn generate(spec: &DatasetSpec) -> Result<Dataset> {
    let points = spec.validate()?;
    let jobs: Vec<(u64, u64)> = (0..points.len() as u64)
        .flat_map(|g| (0..spec.instances as u64).map(move |i| (g, i)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(g, i)| simulate_with_retries(spec, &points[g as usize], g, i))
        .collect::<Result<Vec<_>>>()?;
    let skipped = outcomes.iter().filter(|o| o.is_none()).count() as u64;
    let mut records: Vec<SampleRecord> = outcomes.into_iter().flatten().collect();
    if spec.augmented {
        records = augment_records(&records)?;
    }
    Ok(Dataset {
        spec: spec.clone(),
        skipped,
        records,
    })
}

/// Replaces every record by its five block-permuted views. Targets and ideal
/// matrices are unchanged.
pub fn augment_records(records: &[SampleRecord]) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::with_capacity(records.len() * 5);
    for r in records {
        for (view, noisy) in augment_dc(&r.noisy)?.into_iter().enumerate() {
            out.push(SampleRecord {
                view: view as u64 + 1,
                noisy,
                ..r.clone()
            });
        }
    }
    Ok(out)
}

/// Stratified split. Within every grid point the instances are shuffled with a
/// seed derived from `(seed, grid_index)` and `round(ratio·n)` of them (at
/// least one per side) go to training; all views of an instance stay together.
/// Both halves keep the input order.
pub fn split(records: &[SampleRecord], ratio: f64, seed: u64) -> Result<(Vec<SampleRecord>, Vec<SampleRecord>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(PipelineError::Invalid(format!("split ratio {ratio} outside (0,1)")));
    }
    let mut groups: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for r in records {
        let instances = groups.entry(r.grid_index).or_default();
        if !instances.contains(&r.instance) {
            instances.push(r.instance);
        }
    }
    let mut train_units = std::collections::HashSet::new();
    for (&grid_index, instances) in &mut groups {
        let n = instances.len();
        if n < 2 {
            return Err(PipelineError::Stratify { grid_index, count: n });
        }
        instances.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[grid_index]));
        instances.shuffle(&mut rng);
        let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        for &i in &instances[..n_train] {
            train_units.insert((grid_index, i));
        }
    }
    let (train, val): (Vec<_>, Vec<_>) = records
        .iter()
        .cloned()
        .partition(|r| train_units.contains(&(r.grid_index, r.instance)));
    Ok((train, val))
}
