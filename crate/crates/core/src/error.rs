use thiserror::Error;

/// Errors raised by the inference library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A value lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Array shapes or lengths disagree.
    #[error("structural error: {0}")]
    Structural(String),

    /// A caller-side precondition was not met.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Invalid configuration values.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The sampler was driven in an order its state machine forbids.
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
