use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the toolkit. Variants carry enough context to name the
/// offending quantity; hard simulator-consistency violations use
/// [`Error::Inconsistency`] and should be treated as bugs, not bad input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("disorder law violates ellipticity: {0}")]
    Ellipticity(String),
    #[error("invalid window: {0}")]
    Window(String),
    #[error("invalid profile: {0}")]
    Profile(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error("numerical failure: {0}")]
    Numerics(String),
    #[error("simulator consistency violation: {0}")]
    Inconsistency(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
