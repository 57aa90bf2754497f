//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid pulse shape: {0}")]
    InvalidShape(String),

    #[error("quadrature failed: {0}")]
    QuadratureError(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("propagation did not converge: {0}")]
    NotConverged(String),

    #[error("eigenphase too close to the ±π branch cut: {0}")]
    BranchCutAmbiguity(String),

    #[error("cannot parse sequence: {0}")]
    ParseError(String),

    #[error("sequence not in catalog: {0}")]
    NotInCatalog(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("linear algebra failed: {0}")]
    Linalg(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
