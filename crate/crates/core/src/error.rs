use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its valid domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    /// Adjacency file violates a structural invariant.
    #[error("adjacency cell ({row}, {col}): {reason}")]
    Adjacency {
        row: String,
        col: String,
        reason: String,
    },

    /// Malformed input file; `line` is 1-based and counts the header.
    #[error("{path}:{line}: {reason}")]
    Load {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    #[error("time {t} is outside the trajectory range [{start}, {end}] or off the reporting grid")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("correlation undefined: {0} has zero variance")]
    UndefinedCorrelation(&'static str),

    #[error("non-finite state at node {node}, t = {time}")]
    NonFinite { node: usize, time: f64 },

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
