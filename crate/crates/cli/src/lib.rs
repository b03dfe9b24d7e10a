//! Configuration, orchestration and output for the `resochain` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Solver(#[from] resochain::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use resochain::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(E::Validation(_) | E::Unsupported(_) | E::Misuse(_)) => 2,
            CliError::Solver(_) | CliError::Io(_) => 3,
        }
    }
}
