use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite {what} at t = {t}")]
    NonFinite { t: f64, what: String },

    #[error("configuration error: missing field `{0}`")]
    MissingField(String),

    #[error("linear solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    SolverDivergence { residual: f64, iterations: usize },

    #[error("non-contractive drift: {0}")]
    NonContractive(String),

    #[error("evolution measure at horizon {horizon} not converged (change {change:e} > tol {tol:e}); use a larger horizon")]
    HorizonNotConverged { horizon: f64, change: f64, tol: f64 },

    #[error("non-finite state at step {step} on path {path}")]
    PathBlowup { step: usize, path: usize },

    #[error("truncation: {0}")]
    Truncation(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("scenario error at `{path}`: {message}")]
    Scenario { path: String, message: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
