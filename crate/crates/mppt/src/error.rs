use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Exit status for a malformed or inconsistent configuration.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status for failures while simulating, training or writing output.
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("model file {}: {message}", path.display())]
    Model { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] mppt_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
