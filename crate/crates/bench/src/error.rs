use qpt_nn::NnError;
use qpt_pipeline::PipelineError;
use thiserror::Error;

/// Errors grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training failure: {0}")]
    Training(String),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Data(_) => 3,
            BenchError::Training(_) => 4,
        }
    }
}

impl From<PipelineError> for BenchError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::InvalidSpec(_) => BenchError::Config(e.to_string()),
            PipelineError::Nn(NnError::Diverged { .. } | NnError::NonFinite(_)) => BenchError::Training(e.to_string()),
            _ => BenchError::Data(e.to_string()),
        }
    }
}

impl From<NnError> for BenchError {
    fn from(e: NnError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Data(e.to_string())
    }
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        BenchError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for BenchError {
    fn from(e: serde_json::Error) -> Self {
        BenchError::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
