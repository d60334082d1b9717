//! Operator surface for the information-density reward engine: batch
//! scoring and analysis commands plus an HTTP scoring service. Both paths
//! share one [`infodensity_core::ScoringEngine`].

use thiserror::Error;

pub mod cli;
pub mod commands;
pub mod config;
pub mod server;

pub use config::EngineConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("judge error: {0}")]
    Judge(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    /// Process exit status. Clap usage errors exit with 2 as well.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Judge(_) => 4,
            CliError::Output(_) => 5,
        }
    }
}
