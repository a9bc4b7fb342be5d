use thiserror::Error;

use crate::channel::Diagnostic;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("parse error in `{input}`: {message}")]
    Parse { input: String, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("NONCONVERGED: adaptive quadrature exceeded its budget of {budget} evaluations")]
    NonConverged { budget: usize },

    #[error("model validation failed: {}", format_diagnostics(.0))]
    Validation(Vec<Diagnostic>),

    #[error("ON_CRITICAL_BOUNDARY: {0}")]
    OnCriticalBoundary(String),

    #[error("UNCLASSIFIED: {0}")]
    Unclassified(String),

    #[error("UNSUPPORTED_REGIME: {0}")]
    UnsupportedRegime(String),

    #[error("SCALE_MISMATCH: {0}")]
    ScaleMismatch(String),

    #[error("INSUFFICIENT_POINTS: need at least 3 non-degenerate points, found {found}")]
    InsufficientPoints { found: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(input: &str, message: impl Into<String>) -> Self {
        Error::Parse {
            input: input.to_string(),
            message: message.into(),
        }
    }
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
