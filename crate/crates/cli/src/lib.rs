//! Experiment orchestration for the `hsr` binary: configuration, run
//! directories, manifests and the subcommands.

pub mod commands;
pub mod config;
pub mod replay;

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

pub use commands::{Command, Globals};
pub use config::{ExperimentConfig, Phase, Preset};

/// Content hash of the library sources this binary was built from.
pub const CODE_VERSION: &str = env!("HSR_CODE_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<hsr_core::Error> for CliError {
    fn from(e: hsr_core::Error) -> Self {
        match e {
            hsr_core::Error::Config(_) => CliError::Config(e.to_string()),
            hsr_core::Error::Numerical(_) => CliError::Numerical(e.to_string()),
            hsr_core::Error::Io { .. } | hsr_core::Error::Format { .. } => CliError::Io(e.to_string()),
        }
    }
}

/// `run.json`: everything needed to reproduce a run. Paths are as given in
/// the configuration; nothing time- or host-dependent is recorded.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub run_name: String,
    pub seed: u64,
    pub preset: String,
    pub config_hash: String,
    pub code_version: String,
    /// Files written into the run directory, relative to it.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub const FILE: &'static str = "run.json";
}
