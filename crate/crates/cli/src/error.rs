use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Every failure the command line can report. The category names are part
/// of the output format.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Checkpoint(String),
    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),
    #[error("{0}")]
    Training(spikeq::Error),
    #[error("{0}")]
    Model(spikeq::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Checkpoint(_) => "checkpoint",
            CliError::Locked(_) => "lock",
            CliError::Training(_) => "training",
            CliError::Model(_) => "model",
            CliError::Usage(_) => "usage",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// `error[category]: message` on one line.
    pub fn report(&self) -> String {
        let msg = self.to_string().replace('\n', " ");
        format!("error[{}]: {}", self.category(), msg.trim())
    }
}

impl From<spikeq::Error> for CliError {
    fn from(e: spikeq::Error) -> Self {
        match e {
            spikeq::Error::InvalidConfig { .. } => CliError::Config(e.to_string()),
            spikeq::Error::Diverged { .. } | spikeq::Error::NonFiniteGradient { .. } => {
                CliError::Training(e)
            }
            _ => CliError::Model(e),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
