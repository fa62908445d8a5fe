use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input vector")]
    EmptyInput,

    #[error("invalid quantization scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}{}", context_suffix(.context))]
    DimMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("enumeration bound exceeded: {0}")]
    EnumerationBound(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: u64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn context_suffix(context: &str) -> String {
    if context.is_empty() {
        String::new()
    } else {
        format!(" ({context})")
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
