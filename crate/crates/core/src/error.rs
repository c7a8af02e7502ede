use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A world configuration, persona or hyperparameter set breaks an invariant.
    #[error("configuration error: {0}")]
    Config(String),

    /// An observation references something the world does not know about.
    #[error("validation error [{rule}]: {detail}")]
    Validation { rule: &'static str, detail: String },

    #[error("ordering error: event starts at {start} but the clock is already at {clock}")]
    Ordering { start: i64, clock: i64 },

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("dimension error in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("training error: {0}")]
    Training(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("fingerprint mismatch: expected {expected}, found {found}")]
    Fingerprint { expected: String, found: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(rule: &'static str, detail: impl Into<String>) -> Self {
        Error::Validation {
            rule,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable rule identifier for validation failures, if any.
    pub fn rule(&self) -> Option<&'static str> {
        match self {
            Error::Validation { rule, .. } => Some(rule),
            Error::Ordering { .. } => Some("time-regression"),
            _ => None,
        }
    }
}
