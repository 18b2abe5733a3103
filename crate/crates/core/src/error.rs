use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} is outside the tubular neighborhood ({reason})")]
    OutOfTubularNeighborhood { point: [f64; 3], reason: String },

    #[error("degenerate lift on element {element}: {reason}")]
    DegenerateLift { element: usize, reason: String },

    #[error("unsupported Lagrange degree {0} (supported: 1..=4)")]
    UnsupportedDegree(usize),

    #[error("no quadrature rule with exactness {0} (supported: up to 20)")]
    UnsupportedExactness(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("eigenvalue computation failed: {0}")]
    EigenFailure(String),

    #[error("unsupported surface: {0}")]
    UnsupportedSurface(String),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
