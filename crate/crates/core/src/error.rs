use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("cannot add {requested} edges: only {available} node pairs are unconnected")]
    NotEnoughNonEdges { requested: usize, available: usize },

    #[error("power iteration did not converge after {iterations} iterations (last relative change {residual:e})")]
    PowerIteration { iterations: usize, residual: f64 },

    #[error("graph has no edges; cannot normalize its shift operator")]
    EmptyGraph,

    #[error("non-finite entry while accumulating filter power {power}")]
    FilterOverflow { power: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("reference filter has zero Frobenius norm")]
    ZeroNormReference,

    #[error("non-finite activation in layer {layer}")]
    DivergedForward { layer: usize },

    #[error("training diverged at epoch {epoch} (last finite loss at epoch {last_finite_epoch:?})")]
    Diverged {
        epoch: usize,
        last_finite_epoch: Option<usize>,
    },

    #[error("backward pass requested without a cached forward pass")]
    MissingForwardCache,

    #[error("empty training mask")]
    EmptyMask,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("could not sample a connected graph after {0} attempts")]
    NotConnected(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// True for failures caused by bad input or configuration, as opposed to
    /// numerical or I/O failures at run time.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_) | Error::Config(_) | Error::Parse { .. }
        )
    }
}
