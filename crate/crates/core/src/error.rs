use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed model description (mixture, sequence, schedule).
    #[error("configuration error: {0}")]
    Config(String),
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Operation is defined but not for this kind of input.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Estimator parameters inconsistent with the supplied samples.
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("estimation error: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
