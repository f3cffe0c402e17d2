//! Configuration-driven batch driver for the metrohpi analytics.

pub mod config;
pub mod output;
pub mod pipeline;

use std::path::PathBuf;

use metrohpi_core::ErrorClass;

pub use config::RunConfig;
pub use pipeline::{execute, Stage};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] metrohpi_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    MissingStage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e.class() {
                ErrorClass::Data => 3,
                ErrorClass::Numerical => 4,
            },
            CliError::Io { .. } | CliError::MissingStage(_) => 3,
        }
    }
}
