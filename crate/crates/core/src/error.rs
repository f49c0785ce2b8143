use thiserror::Error;

/// Errors raised by setup, communication, and I/O.
///
/// Iterative non-convergence is never an error: it is reported through
/// [`SolveReport`](crate::krylov::SolveReport).
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix: pivot {pivot} vanished (magnitude {magnitude:e})")]
    SingularMatrix { pivot: usize, magnitude: f64 },

    #[error("structure error: {0}")]
    Structure(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("communicator error: {0}")]
    Communicator(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
