use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("failed to ingest {}: {msg}", path.display())]
    Ingestion { path: PathBuf, msg: String },

    #[error("incompatible model file: {0}")]
    Incompatible(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite loss at epoch {epoch}, step {step}: first non-finite output in layer {layer} ({layer_kind})")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        layer: usize,
        layer_kind: String,
    },

    #[error("training of member {member} (method {method}, dataset {dataset}, fold {fold}, seed {seed:#018x}) failed: {source}")]
    MemberFailed {
        dataset: String,
        method: String,
        fold: usize,
        member: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn ingest(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Ingestion {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
