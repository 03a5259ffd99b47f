use std::io;

use thiserror::Error;

use crate::embedding::EmbeddingMatrix;
use crate::tensor::CpTensor;

/// Parameters that were still finite when training diverged.
#[derive(Debug, Clone)]
pub enum Checkpoint {
    Embeddings(EmbeddingMatrix),
    Tensor(CpTensor),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown word: {0}")]
    UnknownWord(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("undefined value: {0}")]
    Undefined(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged {
        epoch: usize,
        checkpoint: Box<Checkpoint>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
