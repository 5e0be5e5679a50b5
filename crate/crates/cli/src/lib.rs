//! Experiment driver behind the `tlbt` binary: model generation, reduction,
//! bounds, simulation and parameter sweeps, all writing CSV/JSON artifacts.

pub mod commands;
pub mod config;

use thiserror::Error;
use tlbt::MorError;

pub use commands::{cmd_bound, cmd_gen_model, cmd_reduce, cmd_simulate, cmd_sweep, SweepAxis};
pub use config::{ExperimentConfig, InputSpec, ModelSource, Reduction};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] MorError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}
