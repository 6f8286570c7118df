use std::path::PathBuf;

/// Failure categories of the experiment runner, each with its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("tolerance not reached: {0}")]
    ToleranceNotReached(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::ToleranceNotReached(_) => 4,
            CliError::Io { .. } | CliError::Format { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl From<mlsvgd::Error> for CliError {
    fn from(e: mlsvgd::Error) -> Self {
        use mlsvgd::Error as E;
        match e {
            E::Input(_) | E::DimensionMismatch { .. } | E::LevelOutOfRange { .. } | E::Range(_) | E::Config(_) => {
                CliError::Config(e.to_string())
            }
            E::Solver { .. } | E::Divergence { .. } | E::Degenerate(_) | E::NotSpd(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
