//! CLI error taxonomy mapped to process exit codes: configuration problems
//! exit 2, I/O problems exit 3.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

/// Map a core-library error carrying user input into the config class.
impl From<spadsim_core::policy::PolicyError> for CliError {
    fn from(e: spadsim_core::policy::PolicyError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<spadsim_core::bracket::BracketError> for CliError {
    fn from(e: spadsim_core::bracket::BracketError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<spadsim_core::allocation::AllocationError> for CliError {
    fn from(e: spadsim_core::allocation::AllocationError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<spadsim_core::sensor::SensorError> for CliError {
    fn from(e: spadsim_core::sensor::SensorError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<spadsim_core::metrics::MetricsError> for CliError {
    fn from(e: spadsim_core::metrics::MetricsError) -> Self {
        CliError::Config(e.to_string())
    }
}
