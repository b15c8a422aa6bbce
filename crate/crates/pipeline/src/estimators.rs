//! The three parameter-extraction strategies and their result records.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use qpt_core::{ComplexMatrix, FidelityReference, ProcessMatrix};
use qpt_nn::{Network, Tensor};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::family::ChannelFamily;
use crate::features::{ff_batch, image_batch};
use crate::mf::mf_search;

/// Inference chunk size for network evaluation.
const PREDICT_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "mf")]
    Mf,
    #[serde(rename = "ff")]
    Ff,
    #[serde(rename = "ann_ff")]
    AnnFf,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Mf, EstimatorKind::Ff, EstimatorKind::AnnFf];

    pub fn tag(self) -> &'static str {
        match self {
            EstimatorKind::Mf => "mf",
            EstimatorKind::Ff => "ff",
            EstimatorKind::AnnFf => "ann_ff",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EstimatorKind {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mf" => Ok(EstimatorKind::Mf),
            "ff" => Ok(EstimatorKind::Ff),
            "ann_ff" => Ok(EstimatorKind::AnnFf),
            other => Err(PipelineError::Invalid(format!("unknown estimator {other:?}"))),
        }
    }
}

/// One parameter estimate, optionally compared with the ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub family: ChannelFamily,
    pub method: EstimatorKind,
    pub estimate: Vec<f64>,
    pub truth: Option<Vec<f64>>,
    /// `|estimate − truth|` per parameter, present when the truth is known.
    pub residues: Option<Vec<f64>>,
    pub k_factor: Option<f64>,
    pub seed: Option<u64>,
    /// Seconds spent on this estimate. Batched network inference reports the
    /// batch time divided evenly. Not part of the CSV export.
    pub wall_time_s: f64,
}

impl EstimationResult {
    fn new(family: ChannelFamily, method: EstimatorKind, estimate: Vec<f64>, wall_time_s: f64) -> Self {
        Self {
            family,
            method,
            estimate,
            truth: None,
            residues: None,
            k_factor: None,
            seed: None,
            wall_time_s,
        }
    }

    pub fn with_truth(mut self, truth: &[f64]) -> Self {
        self.residues = Some(self.estimate.iter().zip(truth).map(|(e, t)| (e - t).abs()).collect());
        self.truth = Some(truth.to_vec());
        self
    }

    pub fn with_origin(mut self, k_factor: f64, seed: u64) -> Self {
        self.k_factor = Some(k_factor);
        self.seed = Some(seed);
        self
    }
}

/// Column names of the per-record CSV for one family.
pub fn csv_header(family: ChannelFamily) -> Vec<String> {
    let names = family.param_names();
    let mut cols = vec!["family".to_string()];
    for prefix in ["true", "est", "residue"] {
        cols.extend(names.iter().map(|n| format!("{prefix}_{n}")));
    }
    cols.extend(["method", "k_factor", "seed"].map(String::from));
    cols
}

/// Writes results of a single family as CSV. Unknown truths leave empty cells.
pub fn write_results_csv<W: Write>(writer: W, family: ChannelFamily, results: &[EstimationResult]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(csv_header(family))?;
    let n = family.n_params();
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in results {
        if r.family != family || r.estimate.len() != n {
            return Err(PipelineError::Invalid(format!(
                "{} result with {} parameter(s) in a {family} table",
                r.family,
                r.estimate.len()
            )));
        }
        let mut row = vec![family.tag().to_string()];
        for i in 0..n {
            row.push(opt(r.truth.as_ref().map(|t| t[i])));
        }
        row.extend(r.estimate.iter().map(|v| v.to_string()));
        for i in 0..n {
            row.push(opt(r.residues.as_ref().map(|t| t[i])));
        }
        row.push(r.method.tag().to_string());
        row.push(opt(r.k_factor));
        row.push(r.seed.map(|s| s.to_string()).unwrap_or_default());
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

/// An estimator bound to a family, carrying the models it needs.
#[derive(Clone, Debug)]
pub struct Estimator {
    family: ChannelFamily,
    kind: EstimatorKind,
    autoencoder: Option<Network>,
    feed_forward: Option<Network>,
}

impl Estimator {
    pub fn mf(family: ChannelFamily) -> Self {
        Self {
            family,
            kind: EstimatorKind::Mf,
            autoencoder: None,
            feed_forward: None,
        }
    }

    pub fn ff(family: ChannelFamily, feed_forward: Network) -> Result<Self> {
        check_feed_forward(family, &feed_forward)?;
        Ok(Self {
            family,
            kind: EstimatorKind::Ff,
            autoencoder: None,
            feed_forward: Some(feed_forward),
        })
    }

    pub fn ann_ff(family: ChannelFamily, autoencoder: Network, feed_forward: Network) -> Result<Self> {
        check_autoencoder(family, &autoencoder)?;
        check_feed_forward(family, &feed_forward)?;
        Ok(Self {
            family,
            kind: EstimatorKind::AnnFf,
            autoencoder: Some(autoencoder),
            feed_forward: Some(feed_forward),
        })
    }

    pub fn family(&self) -> ChannelFamily {
        self.family
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    /// Estimates for a batch of χ matrices, in input order. MF fans out over
    /// the rayon pool; the network estimators run batched inference.
    pub fn estimate_batch(&self, chis: &[&ComplexMatrix]) -> Result<Vec<EstimationResult>> {
        let (family, kind) = (self.family, self.kind);
        match (&self.autoencoder, &self.feed_forward) {
            (None, None) => chis
                .par_iter()
                .map(|chi| {
                    let start = Instant::now();
                    let mut params = mf_search(chi, family)?;
                    family.clamp(&mut params);
                    Ok(EstimationResult::new(family, kind, params, start.elapsed().as_secs_f64()))
                })
                .collect(),
            (ae, Some(ff)) => {
                if chis.is_empty() {
                    return Ok(Vec::new());
                }
                let start = Instant::now();
                let inputs = match ae {
                    Some(ae) => {
                        let denoised = denoise_images(ae, family, chis)?;
                        denoised_ff_inputs(family, denoised)?
                    }
                    None => ff_batch(family, chis)?,
                };
                let out = ff.predict_batched(&inputs, PREDICT_CHUNK)?;
                let per_record = start.elapsed().as_secs_f64() / chis.len() as f64;
                let scale = family.target_scale();
                Ok((0..chis.len())
                    .map(|i| {
                        let mut params: Vec<f64> = out.row(i).iter().map(|v| v * scale).collect();
                        family.clamp(&mut params);
                        EstimationResult::new(family, kind, params, per_record)
                    })
                    .collect())
            }
            (Some(_), None) => unreachable!("constructors always pair an autoencoder with a feed-forward head"),
        }
    }

    pub fn estimate(&self, chi: &ProcessMatrix) -> Result<EstimationResult> {
        if chi.dim() != self.family.chi_dim() {
            return Err(PipelineError::Invalid(format!(
                "{} expects a {1}x{1} χ, got {2}x{2}",
                self.family,
                self.family.chi_dim(),
                chi.dim()
            )));
        }
        Ok(self.estimate_batch(&[chi.matrix()])?.remove(0))
    }
}

pub fn mf_estimate(chi: &ProcessMatrix, family: ChannelFamily) -> Result<EstimationResult> {
    Estimator::mf(family).estimate(chi)
}

pub fn ff_estimate(model: &Network, chi: &ProcessMatrix, family: ChannelFamily) -> Result<EstimationResult> {
    Estimator::ff(family, model.clone())?.estimate(chi)
}

pub fn ann_ff_estimate(
    autoencoder: &Network,
    feed_forward: &Network,
    chi: &ProcessMatrix,
    family: ChannelFamily,
) -> Result<EstimationResult> {
    Estimator::ann_ff(family, autoencoder.clone(), feed_forward.clone())?.estimate(chi)
}

fn mismatch(family: ChannelFamily, detail: String) -> PipelineError {
    PipelineError::ModelMismatch {
        family: family.to_string(),
        detail,
    }
}

pub fn check_autoencoder(family: ChannelFamily, net: &Network) -> Result<()> {
    let d = family.chi_dim();
    let expected = vec![2, d, d];
    let config = net.config();
    if config.input_shape != expected || config.output_shape() != expected {
        return Err(mismatch(
            family,
            format!(
                "autoencoder maps {:?} -> {:?}, expected {expected:?} -> {expected:?}",
                config.input_shape,
                config.output_shape()
            ),
        ));
    }
    Ok(())
}

pub fn check_feed_forward(family: ChannelFamily, net: &Network) -> Result<()> {
    let config = net.config();
    let (inputs, outputs) = (vec![family.ff_inputs()], vec![family.n_params()]);
    if config.input_shape != inputs || config.output_shape() != outputs {
        return Err(mismatch(
            family,
            format!(
                "feed-forward maps {:?} -> {:?}, expected {inputs:?} -> {outputs:?}",
                config.input_shape,
                config.output_shape()
            ),
        ));
    }
    Ok(())
}

/// Raw autoencoder output `[N, 2, d, d]` for a batch of χ matrices.
pub fn denoise_images(autoencoder: &Network, family: ChannelFamily, chis: &[&ComplexMatrix]) -> Result<Tensor> {
    check_autoencoder(family, autoencoder)?;
    let images = image_batch(chis, family.chi_dim())?;
    Ok(autoencoder.predict_batched(&images, PREDICT_CHUNK)?)
}

/// Feed-forward inputs built from autoencoder output: the real diagonal for DC,
/// the flattened image otherwise. No physical projection is applied.
pub fn denoised_ff_inputs(family: ChannelFamily, denoised: Tensor) -> Result<Tensor> {
    let n = denoised.batch();
    let d = family.chi_dim();
    match family {
        ChannelFamily::Dc => {
            let mut data = Vec::with_capacity(n * d);
            for i in 0..n {
                let row = denoised.row(i);
                data.extend((0..d).map(|j| row[j * d + j]));
            }
            Ok(Tensor::new(vec![n, d], data)?)
        }
        _ => Ok(denoised.reshape(&[n, 2 * d * d])?),
    }
}

/// Fidelities of projected autoencoder outputs with their ideal χ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityAudit {
    pub fidelities: Vec<f64>,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

/// Runs the autoencoder on every noisy χ, projects each output to the nearest
/// physical process matrix and records its fidelity with the paired ideal χ.
pub fn denoise_fidelity_audit(
    autoencoder: &Network,
    family: ChannelFamily,
    noisy: &[&ComplexMatrix],
    ideal: &[&ComplexMatrix],
) -> Result<FidelityAudit> {
    if noisy.len() != ideal.len() || noisy.is_empty() {
        return Err(PipelineError::Invalid(format!(
            "audit needs non-empty paired sets, got {} noisy and {} ideal",
            noisy.len(),
            ideal.len()
        )));
    }
    let out = denoise_images(autoencoder, family, noisy)?;
    let d = family.chi_dim();
    let fidelities = (0..noisy.len())
        .into_par_iter()
        .map(|i| {
            let raw = crate::features::image_to_chi(out.row(i), d)?;
            let projected = ProcessMatrix::project(family.n_qubits(), &raw)?;
            Ok(FidelityReference::from_matrix(ideal[i])?.fidelity(&projected)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(FidelityAudit {
        q05: quantile(&fidelities, 0.05),
        q50: quantile(&fidelities, 0.50),
        q95: quantile(&fidelities, 0.95),
        fidelities,
    })
}

/// Linear-interpolation quantile (type 7) of an unsorted sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
