use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown activation `{0}`")]
    UnknownActivation(String),
    #[error("activation `{name}`: {reason}")]
    BadActivationParam { name: String, reason: String },
    #[error("non-finite activation value at z = {z}")]
    NonFinite { z: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("missing constant `{0}`")]
    MissingConstant(&'static str),
    #[error("dataset has no known separator")]
    NoSeparator,
    #[error("rejection sampling gave up after {0} draws")]
    RejectionCap(usize),
    #[error("parse error in {what}: {reason}")]
    Parse { what: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse { what: what.into(), reason: reason.into() }
    }
}
