use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("scenario mismatch: expected {expected}, found {found}")]
    ScenarioMismatch { expected: String, found: String },
    #[error("weights must be non-negative and sum to 1 (sum = {sum})")]
    Weights { sum: f64 },
    #[error("index out of range: {0}")]
    Index(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("enumeration budget exceeded: {required} terms > {budget}")]
    Budget { required: f64, budget: f64 },
    #[error("malformed box document: {0}")]
    Format(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
