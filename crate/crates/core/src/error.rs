use thiserror::Error;

/// Errors produced by the cache-network toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// An invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// The cache can hold every content with a positive request rate, so the
    /// characteristic time has no finite value.
    #[error("cache of size {size} saturates: only {contents} contents have positive rate")]
    Saturated { size: f64, contents: usize },

    /// An iterative solver gave up.
    #[error("no convergence after {iterations} iterations (worst deviation {worst})")]
    NonConvergence { iterations: usize, worst: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
