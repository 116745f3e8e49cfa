use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vertex index {index} out of range for graph with {n} vertices")]
    VertexOutOfRange { index: usize, n: usize },

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown graph family `{0}`")]
    UnknownFamily(String),

    #[error("transport on edge ({x}, {y}) is not unitary (residual {residual:.3e})")]
    NotUnitary { x: usize, y: usize, residual: f64 },

    #[error("missing transport for edge ({0}, {1})")]
    MissingTransport(usize, usize),

    #[error("endomorphism at vertex {vertex}: {reason}")]
    InvalidEndomorphism { vertex: usize, reason: String },

    #[error("negative time t = {0}")]
    NegativeTime(f64),

    #[error("operator of size {size} exceeds dense limit {limit}")]
    DenseLimitExceeded { size: usize, limit: usize },

    #[error("{method} did not converge (residual estimate {residual:.3e})")]
    NotConverged { method: &'static str, residual: f64 },

    #[error("eigensolve failed: {0}")]
    Eigensolve(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
