use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        actual: String,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("batch normalization needs a batch of at least 2 in training mode, got {0}")]
    BatchTooSmall(usize),
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged: non-finite loss at epoch {epoch} ({stage})")]
    Diverged { epoch: usize, stage: String },
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("model file: bad magic bytes")]
    BadMagic,
    #[error("model file: format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("model file truncated while reading {0}")]
    Truncated(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;

pub(crate) fn shape_mismatch(op: &'static str, expected: impl std::fmt::Debug, actual: impl std::fmt::Debug) -> NnError {
    NnError::ShapeMismatch {
        op,
        expected: format!("{expected:?}"),
        actual: format!("{actual:?}"),
    }
}
