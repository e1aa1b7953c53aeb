use thiserror::Error;

use crate::trs::TrsSolution;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("block {block} is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { block: usize, deviation: f64 },

    #[error("block {block} has a nonzero diagonal entry at index {index}")]
    NonzeroDiagonal { block: usize, index: usize },

    #[error("trust-region solve did not converge after {iterations} iterations (residual {residual:e})")]
    TrsNotConverged {
        iterations: usize,
        residual: f64,
        best: Box<TrsSolution>,
    },

    #[error("eigen-iteration did not converge for block {block}")]
    EigenNotConverged { block: usize },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True when the failure is numerical rather than a usage error.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::TrsNotConverged { .. } | Error::EigenNotConverged { .. } => true,
            Error::Context { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
