use thiserror::Error;

/// Errors surfaced by the library.
///
/// Input problems are split into [`Error::Format`] (a file could not be
/// parsed at all) and [`Error::Validation`] (the parsed data violates an
/// invariant, e.g. an asymmetric demand matrix or a route whose stops are
/// not street-adjacent). Contract violations from callers driving the
/// construction process by hand surface as [`Error::IllegalAction`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("undefined metric: {0}")]
    Undefined(String),
    #[error("illegal action: {0}")]
    IllegalAction(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
