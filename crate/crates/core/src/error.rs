use thiserror::Error;

/// Errors raised while loading data, building models or solving them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation failed ({} problem(s)):\n  {}", .0.len(), .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("solver failure: {message}")]
    Solver {
        message: String,
        /// Best incumbent objective known when the solver stopped, if any.
        incumbent: Option<f64>,
    },

    #[error("no convergence after {iterations} iterations (best error {best_error:.3e})")]
    NoConvergence { iterations: usize, best_error: f64, best: Vec<f64> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn solver(message: impl Into<String>, incumbent: Option<f64>) -> Self {
        Error::Solver { message: message.into(), incumbent }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
