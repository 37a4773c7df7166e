use thiserror::Error;

/// Errors raised by relaxkit operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate cell {cell}: {reason}")]
    DegenerateCell { cell: usize, reason: String },

    #[error("evaluation failed at node {node:?}: {reason}")]
    Evaluation { node: Vec<usize>, reason: String },

    #[error("infinite integrand on cell {cell}")]
    InfiniteOnCell { cell: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("envelope unavailable: {0}")]
    Envelope(String),

    #[error("degenerate affine span: {0}")]
    DegenerateSpan(String),

    #[error("point {point:?} lies outside the finite region of the envelope")]
    OutsideFiniteRegion { point: Vec<f64> },

    #[error("gradient {gradient:?} on cell {cell} is outside the xi box")]
    GradientOutsideBox { cell: usize, gradient: Vec<f64> },

    #[error("non-monotone restricted envelopes: {0}")]
    NonMonotone(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("inconsistent certificate on cell {cell}: {reason}")]
    Certificate { cell: usize, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("relaxed and raw integrands differ on cells {cells:?}")]
    DetachedCells { cells: Vec<usize> },

    #[error("unknown gallery entry `{name}`; known entries: {known}")]
    UnknownEntry { name: String, known: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
