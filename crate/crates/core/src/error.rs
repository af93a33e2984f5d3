use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the domain of the operation (NaN, negative
    /// frequency, non-half-integer spin, asymmetric matrix, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A container could not be built from the supplied arguments.
    #[error("construction error: {0}")]
    Construction(String),

    /// A documented precondition of the call was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative numerical method failed to converge.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The data do not support the requested analysis.
    #[error("analysis error: {0}")]
    Analysis(String),
}

pub type Result<T> = std::result::Result<T, Error>;
