//! Error taxonomy shared by all modules.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible matrix/graph shapes. Carries both shapes so the caller
    /// can see exactly what was combined.
    #[error("dimension mismatch in {op}: left is {lhs:?}, right is {rhs:?}")]
    Dimension {
        op: String,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    /// A caller-side contract was violated (asymmetric adjacency, missing
    /// gradient, window/state length mismatch, fingerprint mismatch, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A metric is undefined on this input (e.g. evolution with an empty
    /// current edge set).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// The reconstruction loss is undefined (snapshot with no active nodes).
    #[error("undefined loss: {0}")]
    UndefinedLoss(String),

    /// A test set came out (or would come out) empty.
    #[error("empty test set: {0}")]
    EmptyTestSet(String),

    /// A computation produced a non-finite value.
    #[error("numeric error: {msg}{}", epoch.map(|e| format!(" (epoch {e})")).unwrap_or_default())]
    Numeric { msg: String, epoch: Option<usize> },

    /// A file could not be parsed.
    #[error("parse error at {file}:{line}: {msg}")]
    Parse {
        file: PathBuf,
        line: usize,
        msg: String,
    },

    /// The file parsed but its content violates the data model.
    #[error("data error: {0}")]
    Data(String),

    /// Invalid configuration.
    #[error("config error: {0}")]
    Config(String),

    /// I/O failure, annotated with the path involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric {
            msg: msg.into(),
            epoch: None,
        }
    }

    pub fn numeric_at(msg: impl Into<String>, epoch: usize) -> Self {
        Error::Numeric {
            msg: msg.into(),
            epoch: Some(epoch),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
