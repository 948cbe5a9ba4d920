use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent input (shapes, non-finite values, empty data).
    #[error("invalid input: {0}")]
    Input(String),

    /// A matrix could not be made symmetric positive definite.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// Every importance weight was zero; the prior and the model never overlap.
    #[error("all {0} importance weights are zero")]
    AllWeightsZero(usize),

    /// A rejection loop ran out of attempts.
    #[error("iteration cap of {0} exhausted")]
    IterationCap(usize),

    /// A file could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
