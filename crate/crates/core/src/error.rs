use thiserror::Error;

/// Errors raised by the dclab library.
#[derive(Debug, Error)]
pub enum DclabError {
    #[error("range error: {0}")]
    Range(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("configuration error: {0}")]
    Config(String),

    /// The dominating form does not control the form on its kernel.
    #[error("domination error: {0}")]
    Domination(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DclabError>;

pub(crate) fn shape_err(expected: impl ToString, got: impl ToString) -> DclabError {
    DclabError::Shape {
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
