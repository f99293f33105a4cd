use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("identity `{identity}` violated at {monomial}")]
    IdentityViolation { identity: String, monomial: String },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("quadrature did not converge: {0}")]
    Accuracy(String),
    #[error("resource budget exceeded: {0}")]
    Resource(String),
    #[error("grid too coarse: {0}")]
    Resolution(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
