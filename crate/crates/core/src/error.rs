use thiserror::Error;

/// Errors raised by the library.
///
/// The variants map onto the process exit codes used by the command line
/// runner: precondition-type failures exit with 2, solver and convergence
/// failures with 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("structural error: {0}")]
    Structural(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("numerical error: {message}")]
    Numerical { message: String, diagnostics: Vec<String> },
    #[error("solver failure: {message}")]
    Solver { message: String, trace: Vec<String> },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// Exit status used by the command line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } | Error::Solver { .. } => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
