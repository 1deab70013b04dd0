//! Error types shared across the toolkit.

use thiserror::Error;

/// Errors reported by toolkit operations.
///
/// The three variants separate "the input point/radius is outside the
/// mathematical domain" from "the input is structurally malformed" and
/// from "a numerical procedure failed to deliver the requested accuracy".
#[derive(Debug, Error)]
pub enum QmodError {
    /// Input lies outside the mathematical domain of the operation
    /// (for example a point on or outside the unit sphere).
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally invalid input (non-orthogonal rotation block,
    /// inadmissible weight function, malformed configuration).
    #[error("validation error: {0}")]
    Validation(String),

    /// A numerical procedure failed: iteration cap hit, zero budget,
    /// quadrature did not settle.
    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, QmodError>;

impl QmodError {
    pub fn domain(msg: impl Into<String>) -> Self {
        QmodError::Domain(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        QmodError::Validation(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        QmodError::Numeric(msg.into())
    }
}
