use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The input lies outside the domain where a quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// An argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Arg(String),
    /// No sign change could be bracketed, or the bracketed search did not converge.
    #[error("root find failed: {0}")]
    RootFindFailed(String),
    /// Malformed serialized input.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn arg(msg: impl Into<String>) -> Error {
    Error::Arg(msg.into())
}
