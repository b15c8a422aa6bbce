use thiserror::Error;

pub type Result<T> = std::result::Result<T, QuantumError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantumError {
    #[error("unsupported qubit count {0} (expected 1 or 2)")]
    UnsupportedQubits(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid channel parameters: {0}")]
    InvalidChannel(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("matrix has eigenvalue {0:e} below the PSD tolerance")]
    NegativeEigenvalue(f64),

    #[error("invalid counts table: {0}")]
    InvalidCounts(String),

    #[error("all counts are zero; nothing to reconstruct")]
    AllZeroCounts,

    #[error("invalid sampling parameter: {0}")]
    InvalidSampling(String),
}
