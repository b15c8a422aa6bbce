//! Parameter estimation for simulated process tomography.
//!
//! Three estimators recover channel parameters from a reconstructed process
//! matrix: a maximum-fidelity grid search over the family's analytic χ, a
//! feed-forward network on the noisy χ, and a denoising convolutional
//! autoencoder followed by a feed-forward network. The [`datasets`] module
//! produces the simulated corpora the networks are trained and evaluated on.

pub mod datasets;
mod error;
mod estimators;
mod family;
mod features;
mod mf;
mod training;

pub use error::{PipelineError, Result};
pub use estimators::{
    ann_ff_estimate, check_autoencoder, check_feed_forward, csv_header, denoise_fidelity_audit,
    denoise_images, denoised_ff_inputs, ff_estimate, mf_estimate, quantile, write_results_csv,
    EstimationResult, Estimator, EstimatorKind, FidelityAudit,
};
pub use family::{ChannelFamily, ENCODER_WIDTHS};
pub use features::{
    augment_dc, chi_image, dc_diagonal_features, ff_batch, ff_features, image_batch, image_to_chi,
    inverse_permutation, permute_dc_blocks, target_batch, DC_BLOCK_PERMUTATIONS,
};
pub use mf::{mf_search, unitary_chi_vector, COARSE_STEP, FINE_STEP};
pub use training::{train_autoencoder, train_feed_forward, train_models, TrainedModels, TrainingPlan};
