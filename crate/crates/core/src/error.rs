use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("Newton iteration did not converge after {iterations} iterations (last iterate {last}, residual {residual})")]
    NoConvergence {
        last: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("rejection bound violated: ratio {ratio} exceeds M = {bound}")]
    BoundViolated { ratio: f64, bound: f64 },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("generator `{0}` provides no true boundary distance")]
    MissingBoundaryDistance(String),

    #[error("query {index} failed: {source}")]
    Query {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("repeat {repeat} failed: {source}")]
    Repeat {
        repeat: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

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
}
