//! Experiment runner: replicated estimator batches with deterministic seed
//! lineage, table and figure reproduction at configurable scale, and the
//! step-size divergence demo. Results are written as CSV with a JSON mirror.

pub mod cli;
pub mod commands;
pub mod config;
pub mod output;

pub use commands::{
    cmd_diverge_demo, cmd_estimators, cmd_exact_bias, cmd_figures, cmd_sqbias, figures_from_rows, DivergeParams,
};
pub use config::{ExperimentConfig, ModelSelector, QPolicy, SqBiasMethod};
pub use output::{DivergeRow, Report, ResultRow, SeriesRow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] usgd_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Core(usgd_core::Error::LevelOverflow { .. }) => 1,
            HarnessError::Core(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn config_error(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}
