use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] crimeflow::Error),

    /// An upstream stage output is absent.
    #[error("{what} not found; run `{command}` (expected {})", path.display())]
    MissingArtifact { what: String, command: String, path: PathBuf },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Document { path: PathBuf, message: String },
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn missing(what: impl Into<String>, command: &str, path: impl Into<PathBuf>) -> Self {
        CliError::MissingArtifact {
            what: what.into(),
            command: command.into(),
            path: path.into(),
        }
    }

    /// 1 for bad inputs, configuration or missing artifacts; 2 for runtime and estimation failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_validation() => 1,
            CliError::Core(_) | CliError::Io { .. } => 2,
            CliError::MissingArtifact { .. } | CliError::Config(_) | CliError::Document { .. } => 1,
        }
    }
}
