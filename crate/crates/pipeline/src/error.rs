use qpt_core::QuantumError;
use qpt_nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("model does not match the {family} input convention: {detail}")]
    ModelMismatch { family: String, detail: String },
    #[error("dataset header: {0}")]
    Header(String),
    #[error("dataset truncated at record {record}")]
    Truncated { record: u64 },
    #[error("dataset checksum mismatch in record {record}")]
    Checksum { record: u64 },
    #[error("dataset record count mismatch: header says {header}, file holds {found}")]
    CountMismatch { header: u64, found: u64 },
    #[error("cannot stratify: grid point {grid_index} has {count} record(s), need at least 2")]
    Stratify { grid_index: u64, count: usize },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, PipelineError>;
