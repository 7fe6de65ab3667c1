//! Library side of the `ncsigma` command: configuration, the five
//! subcommands, and reproducible output directories.

pub mod commands;
pub mod config;
pub mod output;
pub mod selftest;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(nc_sigma::Error),
    /// A core failure with a hint about its likely cause.
    #[error("{source} ({context})")]
    Context {
        source: nc_sigma::Error,
        context: String,
    },
}

impl CliError {
    pub fn from_core(e: nc_sigma::Error) -> Self {
        CliError::Core(e)
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Core(e) if e.is_input_error() => EXIT_CONFIG,
            CliError::Core(_) => EXIT_NUMERIC,
            CliError::Context { source, .. } if source.is_input_error() => EXIT_CONFIG,
            CliError::Context { .. } => EXIT_NUMERIC,
        }
    }

    /// Attaches `context` to numerical core failures; other errors pass through.
    pub fn with_context(self, context: impl FnOnce() -> String) -> Self {
        match self {
            CliError::Core(source) if !source.is_input_error() => CliError::Context {
                source,
                context: context(),
            },
            other => other,
        }
    }
}

impl From<nc_sigma::Error> for CliError {
    fn from(e: nc_sigma::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
