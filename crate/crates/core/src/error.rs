use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A precondition on the inputs of an operation does not hold.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An exponent or parameter constraint is violated; the payload names the inequality.
    #[error("constraint violated: {0}")]
    Constraint(String),

    /// Two objects that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The forcing does not cover the history required by the requested output window.
    #[error("insufficient forcing coverage: {0}")]
    Coverage(String),

    /// The semigroup backend cannot be used with the given coefficient or grid.
    #[error("backend mismatch: {0}")]
    Backend(String),

    /// A hypothesis of the theory (contraction, smallness) fails for the configuration.
    #[error("hypothesis failure: {0}")]
    Hypothesis(String),

    /// A fixed-point iteration stopped contracting.
    #[error("divergence: {0}")]
    Divergence(String),

    /// Malformed text input.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
