use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by ingestion, validation and the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A malformed input row. `row` is 1-based and counts the header as row 1.
    #[error("{source_name}: row {row}: {message}")]
    Row {
        source_name: String,
        row: usize,
        message: String,
    },

    /// A group-level problem found while reducing unit records.
    #[error("group {group:?}: {message}")]
    Group { group: String, message: String },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    /// A parameter outside its domain.
    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
