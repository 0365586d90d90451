use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (window, index,
    /// parameter range).
    #[error("domain error: {0}")]
    Domain(String),
    /// The operation needs a capability the input does not provide, e.g.
    /// backward iteration through a map without an inverse.
    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
