use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of a function.
    #[error("domain error in {func}: {msg}")]
    Domain { func: &'static str, msg: String },

    /// Caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Dimension mismatch between paired inputs.
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A factorization or solve broke down.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Iterative solver stopped short of its tolerance.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Logistic or probit fit diverged.
    #[error("separation detected: coefficient norm {norm:e} exceeds {limit:e}")]
    Separation { norm: f64, limit: f64 },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Scenario {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(func: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            func,
            msg: msg.into(),
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Wraps an error with a description of the scenario that produced it.
    pub fn in_scenario(self, context: impl Into<String>) -> Self {
        Error::Scenario {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Broad category, used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Domain { .. }
            | Error::Contract(_)
            | Error::Dimension { .. }
            | Error::Schema(_)
            | Error::Parse { .. } => ErrorKind::Contract,
            Error::Numerical(_) | Error::Convergence { .. } | Error::Separation { .. } => {
                ErrorKind::Numerical
            }
            Error::Io { .. } => ErrorKind::Io,
            Error::Scenario { source, .. } => source.kind(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Contract,
    Numerical,
    Io,
}
