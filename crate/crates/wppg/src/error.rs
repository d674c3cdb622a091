use std::path::{Path, PathBuf};

/// Failures surfaced by the command line. Each maps to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing {path}; run `wppg {stage}` first")]
    MissingArtifact { path: PathBuf, stage: &'static str },
    #[error(transparent)]
    Core(#[from] wppg_core::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for everything about the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn data_err(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}
