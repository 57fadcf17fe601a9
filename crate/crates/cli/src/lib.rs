//! Experiment harness behind the `gtv` binary: JSON experiment configs,
//! the shipped presets, the runner and CSV normalization.

pub mod config;
pub mod experiment;
pub mod plots;

pub use config::{preset, ExperimentConfig, Metric, Workload, PRESETS};
pub use experiment::{run_experiment, ExperimentTable};
pub use plots::emit_plots_data;

use gtv::GtvError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("run at param {param}{} seed {seed} failed: {source}", series.as_ref().map(|s| format!(" series {s}")).unwrap_or_default())]
    Run {
        param: f64,
        series: Option<String>,
        seed: u64,
        source: Box<CliError>,
    },
}

impl CliError {
    /// Process exit status: 2 config, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
            CliError::Run { source, .. } => source.exit_code(),
        }
    }
}

impl From<GtvError> for CliError {
    fn from(e: GtvError) -> Self {
        match e {
            GtvError::Io(msg) => CliError::Io(msg),
            GtvError::NonFinite(msg) => CliError::Numerical(msg),
            e @ GtvError::InnerSolve { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}
