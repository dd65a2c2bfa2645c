use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field contains a non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A coefficient condition was asked of a sequence that violates its
    /// power precondition (e.g. `alpha_k > 2`).
    #[error("term {index} has alpha = {alpha}, but {condition} requires {requirement}")]
    TermPrecondition {
        index: usize,
        alpha: f64,
        condition: &'static str,
        requirement: &'static str,
    },

    #[error("omega = {omega} is outside the admissible interval (0, {upper})")]
    InadmissibleOmega { omega: f64, upper: f64 },

    #[error("ground-state iteration diverged after {iterations} iterations: {reason}")]
    Diverged { iterations: usize, reason: String },

    #[error("ground-state iteration hit {iterations} iterations (residual {residual:e})")]
    MaxIter { iterations: usize, residual: f64 },

    #[error("implicit stage equations did not converge at t = {t}")]
    StepRejected { t: f64 },

    #[error("blow-up detected at t = {t} ({cause})")]
    BlowupDetected { t: f64, cause: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
