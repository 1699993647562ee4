//! Experiment runner for the `fedkan` simulator: configuration, metrics
//! export, sweeps and the codec verification commands.

pub mod bench;
pub mod config;
pub mod runner;
pub mod sweep;

pub use config::{ExperimentConfig, Mode, Seeds};

use fedkan::codec::CodecError;
use fedkan::data::DataError;
use fedkan::fl::FlError;
use fedkan::kan::KanError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FEDKAN_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Fl(#[from] FlError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Kan(#[from] KanError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Verification(_) => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}
