use thiserror::Error;

/// Errors reported by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("value {value} outside the admissible range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("urn function is not differentiable at y = {0}")]
    NotDifferentiable(f64),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("argument left the domain of the inverse urn function: {0}")]
    DomainBreach(String),
    #[error("numerical method did not converge: {0}")]
    NonConvergence(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
