use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("line {line}, column '{column}': non-numeric value '{value}'")]
    NonNumeric {
        line: u64,
        column: String,
        value: String,
    },

    #[error("single-class dataset")]
    SingleClass,

    #[error("label column: {0}")]
    LabelColumn(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("attribute {0} has no observed values")]
    Unobserved(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("method {method} cannot be built this way: {reason}")]
    Method { method: String, reason: String },

    #[error("model file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
