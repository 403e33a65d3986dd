use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the design pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed numeric input; `offset` is the byte position of the offending token.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    /// No admissible route exists for an OD pair under the design.
    #[error("infeasible route {origin}->{destination} under design {design}")]
    InfeasibleRoute { design: String, origin: usize, destination: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
