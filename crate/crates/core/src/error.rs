use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LcboError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("output index {index} out of range for {outputs} outputs")]
    OutputOutOfRange { index: usize, outputs: usize },

    #[error("covariance factorization failed even with jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("point lies outside the domain at coordinate {coord}")]
    OutsideDomain { coord: usize },

    #[error("hyperparameter optimization diverged")]
    Divergence,

    #[error("problem `{0}` exposes no analytic gradients")]
    NoAnalyticGradients(String),

    #[error("singular stiffness matrix")]
    SingularStiffness,

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("malformed geometry file at line {line}: {msg}")]
    Geometry { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, LcboError>;
