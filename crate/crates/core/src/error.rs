use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("factorization failed: non-positive pivot {value:e} at row {row}")]
    Factorization { row: usize, value: f64 },

    #[error("degenerate coefficient: temperature {value} at x = {x}")]
    DegenerateCoefficient { x: f64, value: f64 },

    #[error("eigendecomposition did not converge after {sweeps} sweeps")]
    Decomposition { sweeps: usize },

    #[error("invalid realization: transmittivity {value} at node {node}")]
    RealizationInvalid { node: usize, value: f64 },

    #[error("incomplete evaluation: expected {expected} node values, got {got}")]
    IncompleteEvaluation { expected: usize, got: usize },

    #[error("degenerate mode {index}: eigenvalue {value:e} below floor {floor:e}")]
    DegenerateMode { index: usize, value: f64, floor: f64 },

    #[error("iteration diverged: update norm grew for 3 consecutive iterations (last at {iteration})")]
    Divergence { iteration: usize },

    #[error("quadrature node {node} failed: {source}")]
    NodeFailure { node: usize, source: Box<Error> },

    #[error("iteration map is not contractive: spectral radius {radius}")]
    NonContractive { radius: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("too many failed samples: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
