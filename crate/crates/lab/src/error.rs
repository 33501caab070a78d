use std::path::PathBuf;

/// Exit status contract of the command-line tool.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Bad configuration or arguments.
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] spectral_opt_core::Error),
}

impl LabError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Config problems and unreadable inputs are usage errors; everything
    /// else is a run failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Parse { .. } => EXIT_USAGE,
            Self::Io { .. } => EXIT_USAGE,
            Self::Csv(_) | Self::Core(_) => EXIT_FAILURE,
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
