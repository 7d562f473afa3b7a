use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid network configuration or parameter.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Bad argument to an operation (index out of range, window too long, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Dataset or query ingestion failure.
    #[error("data error: {0}")]
    Data(String),

    /// A state that the engine itself should never produce.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("usage score undefined for input hypercolumn {input} -> hidden hypercolumn {hidden}: no active outgoing connections")]
    UndefinedUsage { input: usize, hidden: usize },

    #[error("instance too large for exhaustive enumeration: {size} > {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }
}
