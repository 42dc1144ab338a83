use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("fields live on different domains")]
    DomainMismatch,

    #[error("nodes not covered by any chart: {0:?}")]
    Coverage(Vec<usize>),

    #[error("monte carlo bounding box failure: acceptance rate {0:.2e}")]
    BoundingBox(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("compatibility condition violated: integral of f is {0:.3e}")]
    Compatibility(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("csv container error: {0}")]
    Container(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
