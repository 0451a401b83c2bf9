//! Command-line driver pieces: configuration, output serialization, run
//! manifests, the per-command runners, and the verification suite.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod output;
pub mod verify;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] antidot_core::Error),
}
