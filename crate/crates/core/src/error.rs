use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("function is not even (max asymmetry {0:e})")]
    NotEven(f64),

    #[error("unsupported request: {0}")]
    Unsupported(String),

    #[error("density {rho_star} is not admissible: {reason}")]
    DensityOutOfRange { rho_star: f64, reason: String },

    #[error("no convergence after {steps} steps: {what}")]
    NoConvergence { steps: usize, what: String },

    #[error("target pair correlation overlaps the hard core (value {value:e} at x = {x})")]
    InfiniteEnergy { value: f64, x: f64 },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("quadrature overflow: {0}")]
    Overflow(String),

    #[error("missing configuration key `{0}`")]
    MissingKey(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
