//! Two-stage training: the denoising autoencoder first, then the feed-forward
//! regressors on denoised (cascade) and noisy (baseline) inputs.

use qpt_core::seed::{derive_seed, label_coord};
use qpt_nn::{train, Dataset, Network, NetworkConfig, Tensor, TrainConfig, TrainReport};
use serde::{Deserialize, Serialize};

use crate::datasets::{augment_records, SampleRecord};
use crate::error::{PipelineError, Result};
use crate::estimators::{denoise_images, denoised_ff_inputs};
use crate::family::ChannelFamily;
use crate::features::{ff_batch, image_batch, target_batch};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingPlan {
    pub autoencoder: TrainConfig,
    pub feed_forward: TrainConfig,
    /// Train the DC autoencoder on block-permuted views of the training split.
    #[serde(default)]
    pub augment_dc: bool,
    #[serde(default = "default_true")]
    pub batch_norm: bool,
}

fn default_true() -> bool {
    true
}

impl Default for TrainingPlan {
    fn default() -> Self {
        Self {
            autoencoder: TrainConfig::default(),
            feed_forward: TrainConfig::default(),
            augment_dc: true,
            batch_norm: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedModels {
    pub autoencoder: Network,
    /// Regressor fed with autoencoder output.
    pub cascade_head: Network,
    /// Regressor fed with the noisy χ directly.
    pub baseline_head: Network,
    pub autoencoder_report: TrainReport,
    pub cascade_report: TrainReport,
    pub baseline_report: TrainReport,
}

fn refs(records: &[SampleRecord]) -> Vec<&qpt_core::ComplexMatrix> {
    records.iter().map(|r| &r.noisy).collect()
}

fn check_records(family: ChannelFamily, records: &[SampleRecord], what: &str) -> Result<()> {
    let d = family.chi_dim();
    if records.is_empty() {
        return Err(PipelineError::Invalid(format!("{what} split is empty")));
    }
    if let Some(r) = records.iter().find(|r| r.noisy.dim() != d || r.params.len() != family.n_params()) {
        return Err(PipelineError::Invalid(format!(
            "{what} record ({}, {}) does not belong to the {family} family",
            r.grid_index, r.instance
        )));
    }
    Ok(())
}

fn targets(family: ChannelFamily, records: &[SampleRecord]) -> Result<Tensor> {
    let params: Vec<&[f64]> = records.iter().map(|r| r.params.as_slice()).collect();
    target_batch(family, &params)
}

/// Autoencoder mapping noisy χ images to ideal χ images.
pub fn train_autoencoder(
    family: ChannelFamily,
    train_set: &[SampleRecord],
    val_set: &[SampleRecord],
    config: &TrainConfig,
    batch_norm: bool,
    seed: u64,
) -> Result<(Network, TrainReport)> {
    let d = family.chi_dim();
    let to_dataset = |records: &[SampleRecord]| -> Result<Dataset> {
        let noisy = image_batch(&refs(records), d)?;
        let ideal: Vec<_> = records.iter().map(|r| &r.ideal).collect();
        Ok(Dataset::new(noisy, image_batch(&ideal, d)?)?)
    };
    let mut shape = family.autoencoder_shape();
    shape.batch_norm = batch_norm;
    let mut net = Network::new(NetworkConfig::autoencoder(&shape)?, derive_seed(seed, &[label_coord("init")]))?;
    let report = train(
        &mut net,
        &to_dataset(train_set)?,
        &to_dataset(val_set)?,
        config,
        derive_seed(seed, &[label_coord("shuffle")]),
    )?;
    Ok((net, report))
}

/// Feed-forward regressor from prepared inputs to scaled parameters.
pub fn train_feed_forward(
    family: ChannelFamily,
    train_set: Dataset,
    val_set: Dataset,
    config: &TrainConfig,
    seed: u64,
) -> Result<(Network, TrainReport)> {
    let mut net = Network::new(
        NetworkConfig::feed_forward(&family.feed_forward_shape())?,
        derive_seed(seed, &[label_coord("init")]),
    )?;
    let report = train(&mut net, &train_set, &val_set, config, derive_seed(seed, &[label_coord("shuffle")]))?;
    Ok((net, report))
}

/// Trains all three networks of a family. The cascade head sees the trained
/// autoencoder's output on the (unaugmented) splits; the baseline head sees
/// the noisy χ.
pub fn train_models(
    family: ChannelFamily,
    train_set: &[SampleRecord],
    val_set: &[SampleRecord],
    plan: &TrainingPlan,
    seed: u64,
) -> Result<TrainedModels> {
    check_records(family, train_set, "training")?;
    check_records(family, val_set, "validation")?;
    let augmented;
    let ae_train = if plan.augment_dc && family == ChannelFamily::Dc {
        augmented = augment_records(train_set)?;
        &augmented[..]
    } else {
        train_set
    };
    let (autoencoder, autoencoder_report) = train_autoencoder(
        family,
        ae_train,
        val_set,
        &plan.autoencoder,
        plan.batch_norm,
        derive_seed(seed, &[label_coord("autoencoder")]),
    )?;

    let denoised = |records: &[SampleRecord]| -> Result<Dataset> {
        let out = denoise_images(&autoencoder, family, &refs(records))?;
        Ok(Dataset::new(denoised_ff_inputs(family, out)?, targets(family, records)?)?)
    };
    let (cascade_head, cascade_report) = train_feed_forward(
        family,
        denoised(train_set)?,
        denoised(val_set)?,
        &plan.feed_forward,
        derive_seed(seed, &[label_coord("cascade")]),
    )?;

    let noisy = |records: &[SampleRecord]| -> Result<Dataset> {
        Ok(Dataset::new(ff_batch(family, &refs(records))?, targets(family, records)?)?)
    };
    let (baseline_head, baseline_report) = train_feed_forward(
        family,
        noisy(train_set)?,
        noisy(val_set)?,
        &plan.feed_forward,
        derive_seed(seed, &[label_coord("baseline")]),
    )?;

    Ok(TrainedModels {
        autoencoder,
        cascade_head,
        baseline_head,
        autoencoder_report,
        cascade_report,
        baseline_report,
    })
}
