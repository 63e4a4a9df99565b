use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced while reading LETOR text.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: label {token:?} is not a non-negative integer")]
    InvalidLabel { line: usize, token: String },
    #[error("no documents")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("config error: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("feature id {id} out of range (dataset has {count} features)")]
    FeatureOutOfRange { id: usize, count: usize },
    #[error("length mismatch for {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("unknown objective {0:?}")]
    UnknownObjective(String),
    #[error("degenerate baseline: cost scale for {name:?} is {value}")]
    DegenerateScale { name: String, value: f64 },
    #[error("non-finite score produced at boosting round {round}")]
    NonFiniteScore { round: usize },
    #[error("model corrupted or version mismatch")]
    ModelCorrupted,
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
