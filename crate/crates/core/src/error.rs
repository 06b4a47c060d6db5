use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The configuration violates an invariant or describes infeasible geometry.
    #[error("configuration error: {0}")]
    Config(String),

    /// A UE cannot be served at a positive rate by the eNB it is assigned to
    /// (or by any eligible eNB).
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The problem is too large for an exhaustive oracle.
    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("format error in {path}: {msg}")]
    Format { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
