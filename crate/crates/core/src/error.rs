use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coordinate {index}: value {value} lies outside the support of its marginal")]
    OutsideSupport { index: usize, value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("correlation matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("response variance is zero; relative error undefined")]
    ZeroVariance,

    #[error("least-squares solve failed: {0}")]
    Solve(String),

    #[error("candidate basis of {size} terms exceeds guard {limit}; lower the degree or q")]
    BasisTooLarge { size: usize, limit: usize },

    #[error("no validation point exceeds the threshold {0}")]
    NoExceedances(f64),

    #[error("FORM did not converge after {iterations} iterations (last iterate {last:?})")]
    FormNotConverged { iterations: usize, last: Vec<f64> },

    #[error("zero gradient of the limit state at {0:?}")]
    ZeroGradient(Vec<f64>),

    #[error("SORM breakdown: 1 + beta * kappa = {0} <= 0; use importance sampling instead")]
    SormBreakdown(f64),

    #[error("singular stiffness matrix (mechanism)")]
    SingularStiffness,

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("all candidates failed: {0}")]
    AllCandidatesFailed(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
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

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
