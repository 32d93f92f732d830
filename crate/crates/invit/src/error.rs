use thiserror::Error;

/// Failure classes of the runner; each maps to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Runtime(_) => 2,
        }
    }

    /// Prefixes the message with the config that caused it.
    pub fn context(self, what: &str) -> Self {
        match self {
            Self::Validation(m) => Self::Validation(format!("{what}: {m}")),
            Self::Runtime(m) => Self::Runtime(format!("{what}: {m}")),
        }
    }
}

impl From<invit_core::Error> for CliError {
    fn from(e: invit_core::Error) -> Self {
        use invit_core::Error as E;
        match e {
            E::Validation(_) | E::Parse(_) => Self::Validation(e.to_string()),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}
