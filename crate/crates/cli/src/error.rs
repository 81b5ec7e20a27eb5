use std::path::{Path, PathBuf};

/// Everything a command can fail with. [`CliError::exit_code`] maps each
/// class to the process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] quatkg::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn json(path: impl AsRef<Path>, source: serde_json::Error) -> Self {
        CliError::Json {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        use quatkg::Error as E;
        match self {
            CliError::Usage(_) | CliError::Core(E::Config(_)) => EXIT_USAGE,
            CliError::Io { .. }
            | CliError::Json { .. }
            | CliError::Core(E::Io { .. } | E::Parse { .. } | E::Checkpoint(_)) => EXIT_IO,
            CliError::Core(E::NonFinite(_)) => EXIT_NUMERIC,
            CliError::Core(_) => EXIT_OTHER,
        }
    }
}
