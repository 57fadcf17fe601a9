use thiserror::Error;

/// Errors raised by graph construction, the operator catalog and the solver.
///
/// Node indices and record positions carried in error values are 0-based,
/// like every index in the library API. File loaders translate from the
/// 1-based ids used on disk before validating.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GtvError {
    #[error("edge record {index}: self-loop at node {node}")]
    SelfLoop { index: usize, node: usize },

    #[error("edge record {index}: duplicate edge {{{i}, {j}}}")]
    DuplicateEdge { index: usize, i: usize, j: usize },

    #[error("edge record {index}: weight {weight} is not strictly positive and finite")]
    InvalidWeight { index: usize, weight: f64 },

    #[error("edge record {index}: node id {node} outside 0..{n}")]
    NodeOutOfRange { index: usize, node: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("inner solver did not converge after {iterations} iterations (residual {residual:e})")]
    InnerSolve { iterations: usize, residual: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for GtvError {
    fn from(e: std::io::Error) -> Self {
        GtvError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for GtvError {
    fn from(e: serde_json::Error) -> Self {
        GtvError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GtvError>;
