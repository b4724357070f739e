//! Configuration, orchestration and persistence for `kepsctl`.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

pub use config::{RunConfig, Setup};

/// Process exit status of a subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    ConfigError = 2,
    SolverFailure = 3,
    VerificationFailure = 4,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(#[source] keps_nullctl::Error),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn status(&self) -> Status {
        match self {
            CliError::Config(_) => Status::ConfigError,
            CliError::Solver(_) | CliError::Io(_) => Status::SolverFailure,
            CliError::Verification(_) => Status::VerificationFailure,
        }
    }
}

impl From<keps_nullctl::Error> for CliError {
    fn from(e: keps_nullctl::Error) -> Self {
        match e {
            keps_nullctl::Error::Io(io) => CliError::Io(io),
            other => CliError::Solver(other),
        }
    }
}
