//! A small f64 neural-network engine: NCHW tensors, convolution and transposed
//! convolution, batch normalization, ReLU and dense layers with hand-written
//! backward passes, an Adam optimizer, a deterministic training loop and a
//! self-describing binary model format.

mod error;
mod gemm;
pub mod io;
pub mod layers;
mod loss;
mod network;
mod optim;
mod tensor;
mod train;

pub use error::{NnError, Result};
pub use io::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use layers::{Cache, Layer, LayerSpec, Padding, Param};
pub use loss::mse_loss;
pub use network::{AutoencoderShape, FeedForwardShape, Network, NetworkConfig, Trace, BN_EPSILON, BN_MOMENTUM};
pub use optim::{Adam, AdamConfig};
pub use tensor::Tensor;
pub use train::{evaluate_mse, train, Dataset, TrainConfig, TrainReport};
