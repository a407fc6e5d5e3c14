//! Batch pipeline behind the `fxlab` command: load two country panels, test
//! stationarity and causality, fit VAR, SVR and LSTM forecasters for the
//! target series, and score them on a chronological hold-out.

pub mod config;
mod output;
pub mod pipeline;

use thiserror::Error;

pub use config::{ModelKind, PipelineConfig, StationarityPolicy};
pub use pipeline::Pipeline;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) | CliError::Config(_) => 2,
        }
    }
}

pub(crate) fn runtime(context: impl std::fmt::Display, err: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{context}: {err}"))
}
