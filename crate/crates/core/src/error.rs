use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at position {position}: expected {expected}")]
    Syntax { position: usize, expected: String },

    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },

    #[error("`{node}` is undefined at r = {r}")]
    Domain { r: f64, node: String },

    #[error("quadrature tolerance not met: best value {value}, error estimate {estimate}")]
    QuadratureFailure { value: f64, estimate: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("balance condition violated at r = {r} (M(r) = {value})")]
    BalanceViolation { r: f64, value: f64 },

    #[error("hypothesis h <= w'/w violated at r = {r} (h = {h}, eta = {eta})")]
    HypothesisViolation { r: f64, h: f64, eta: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("config error at `{pointer}`: {message}")]
    Config { pointer: String, message: String },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    pub(crate) fn domain(r: f64, node: impl Into<String>) -> Self {
        Error::Domain { r, node: node.into() }
    }

    /// Process exit status used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Syntax { .. }
            | Error::UnknownIdentifier { .. }
            | Error::Config { .. }
            | Error::Io(_) => 1,
            Error::Verification(_) => 3,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
