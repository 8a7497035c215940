use thiserror::Error;

/// Errors produced by construction, validation, and I/O paths.
///
/// Numerical near-degeneracies (rank-deficient projections, assignment ties)
/// are reported through flags on the result types, not through this enum; only
/// genuinely unusable inputs reach an `Err`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A quantity that normalizes a check is zero, so the check has no scale.
    #[error("undefined scale: {0}")]
    UndefinedScale(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
