//! Experiment driver for the regularized Bingham solver: configuration
//! layering, single runs, parameter sweeps and their CSV/VTK output.

pub mod config;
pub mod output;
pub mod run;

use std::path::PathBuf;

pub use config::{ConfigError, SolverConfig, SweepLists};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Solver(#[from] bingham_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad input, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Usage(_) => 2,
            Self::Solver(bingham_core::Error::InvalidParameter { .. }) => 2,
            Self::Solver(_) | Self::Io { .. } => 1,
        }
    }
}
