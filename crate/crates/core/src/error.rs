use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty softmax domain")]
    EmptySoftmax,
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("topology: {0}")]
    Topology(String),
    #[error("environment: {0}")]
    Env(String),
    #[error("statistics: {0}")]
    Stats(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimMismatch {
            context,
            expected,
            got,
        })
    }
}
