//! Experiment front end for the `aoi` binary: JSON configuration, the
//! drivers behind each subcommand, and CSV output.

pub mod commands;
pub mod config;
pub mod output;

use aoi_core::dual::DualError;
use aoi_core::oracle::OracleError;
use aoi_core::sim::SimError;
use aoi_core::CmdpError;
use std::path::PathBuf;
use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Dual(#[from] DualError),

    #[error(transparent)]
    Cmdp(#[from] CmdpError),

    #[error(transparent)]
    Oracle(#[from] OracleError),

    #[error(transparent)]
    Sim(#[from] SimError),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),

    #[error("LP and oracle disagree by {max_deviation:e} (limit {limit:e})", limit = commands::ORACLE_TOL)]
    OracleMismatch { max_deviation: f64 },
}

impl CliError {
    /// 2 for configuration problems, 1 for everything found at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}
