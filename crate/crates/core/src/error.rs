use thiserror::Error;

/// Errors produced by the learning and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("duplicate {kind} points at indices {first} and {second} (distance {distance:e})")]
    DuplicatePoints {
        kind: &'static str,
        first: usize,
        second: usize,
        distance: f64,
    },

    #[error(
        "Gram matrix is not positive definite with jitter {jitter:e} (min eigenvalue {min_eigenvalue:e}); \
         increase the jitter or remove duplicate/near-duplicate points"
    )]
    NotPositiveDefinite { jitter: f64, min_eigenvalue: f64 },

    #[error("explicit Kronecker path limited to {cap} product points, got {requested}; use the factored path")]
    ExplicitCapExceeded { cap: usize, requested: usize },

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
