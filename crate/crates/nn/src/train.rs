use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_mismatch, NnError, Result};
use crate::loss::mse_loss;
use crate::network::Network;
use crate::optim::{Adam, AdamConfig};
use crate::tensor::Tensor;

/// Paired inputs and regression targets, batch along the leading dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Tensor,
    pub targets: Tensor,
}

impl Dataset {
    pub fn new(inputs: Tensor, targets: Tensor) -> Result<Self> {
        if inputs.batch() != targets.batch() {
            return Err(shape_mismatch("Dataset::new", inputs.batch(), targets.batch()));
        }
        inputs.ensure_finite("dataset inputs")?;
        targets.ensure_finite("dataset targets")?;
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many consecutive epochs without a new best validation loss.
    pub patience: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_epochs: 20,
            patience: 5,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 || self.max_epochs == 0 || !(self.adam.learning_rate > 0.0) {
            return Err(NnError::InvalidConfig(format!(
                "training needs batch_size ≥ 2, max_epochs ≥ 1 and a positive learning rate: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Sample-weighted mean of the mini-batch losses seen during each epoch.
    pub train_loss: Vec<f64>,
    /// Inference-mode MSE on the validation set after each epoch.
    pub val_loss: Vec<f64>,
    pub epochs: usize,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub final_val_mse: f64,
    pub stopped_early: bool,
}

/// Mini-batch boundaries for one epoch. A trailing batch of one sample is
/// merged into its predecessor since batch statistics need two samples.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().map(|b| b.len()) == Some(1) {
        out.pop();
        let start = (out.len() - 1) * size;
        *out.last_mut().expect("at least one batch") = &order[start..];
    }
    out
}

/// Inference-mode MSE over a dataset.
pub fn evaluate_mse(net: &Network, data: &Dataset) -> Result<f64> {
    let pred = net.predict_batched(&data.inputs, 256)?;
    Ok(mse_loss(&pred, &data.targets)?.0)
}

/// Trains with Adam on shuffled mini-batches. After every epoch the validation
/// loss is measured; the weights of the best epoch are restored at the end.
/// Deterministic for a given `seed`.
pub fn train(
    net: &mut Network,
    train_set: &Dataset,
    val_set: &Dataset,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainReport> {
    config.validate()?;
    if train_set.len() < 2 || val_set.is_empty() {
        return Err(NnError::InvalidData(format!(
            "need ≥ 2 training and ≥ 1 validation samples, got {} and {}",
            train_set.len(),
            val_set.len()
        )));
    }
    let out_shape = net.config().output_shape();
    if train_set.targets.shape()[1..] != out_shape[..] || val_set.targets.shape()[1..] != out_shape[..] {
        return Err(shape_mismatch("train targets", &out_shape, train_set.targets.shape()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adam = Adam::new(config.adam);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut report = TrainReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        epochs: 0,
        best_epoch: 0,
        final_val_mse: f64::INFINITY,
        stopped_early: false,
    };
    let mut best = net.clone();
    let mut stale = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for (b, rows) in batches(&order, config.batch_size).into_iter().enumerate() {
            let x = train_set.inputs.select(rows);
            let y = train_set.targets.select(rows);
            net.zero_grad();
            let (pred, trace) = net.forward_train(&x)?;
            let (loss, grad) = mse_loss(&pred, &y)?;
            if !loss.is_finite() {
                return Err(NnError::Diverged {
                    epoch,
                    stage: format!("batch {b}"),
                });
            }
            net.backward(&trace, &grad)?;
            adam.step(net.params_mut());
            weighted += loss * rows.len() as f64;
        }
        let val = evaluate_mse(net, val_set)?;
        if !val.is_finite() {
            return Err(NnError::Diverged {
                epoch,
                stage: "validation".into(),
            });
        }
        report.train_loss.push(weighted / train_set.len() as f64);
        report.val_loss.push(val);
        report.epochs = epoch;
        if val < report.final_val_mse {
            report.final_val_mse = val;
            report.best_epoch = epoch;
            best = net.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                report.stopped_early = epoch < config.max_epochs;
                break;
            }
        }
    }
    *net = best;
    Ok(report)
}
