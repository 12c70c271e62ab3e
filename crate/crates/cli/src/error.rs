use std::fmt;
use std::process::ExitCode;

/// Failure classes with distinct process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Invalid flags or flag combinations (exit 2).
    Usage(String),
    /// Malformed or missing input files (exit 3).
    Input(anyhow::Error),
    /// Anything that went wrong while computing or writing results (exit 4).
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Runtime(_) => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Input(e) => write!(f, "input error: {e:#}"),
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl From<conest::Error> for CliError {
    fn from(e: conest::Error) -> Self {
        match e {
            conest::Error::Config(m) => CliError::Usage(m),
            other => CliError::Runtime(other.into()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags an I/O-level failure as a runtime error.
pub trait RuntimeContext<T> {
    fn runtime(self, what: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> RuntimeContext<T> for Result<T, E> {
    fn runtime(self, what: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| CliError::Runtime(e.into().context(what())))
    }
}
