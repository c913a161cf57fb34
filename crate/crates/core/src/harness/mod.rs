//! Scenario files, presets, single runs, sweeps and their output files.

pub mod driver;
pub mod output;
pub mod preset;
pub mod scenario;
pub mod sweep;

use thiserror::Error;

pub use driver::{run, ConnReport, RunError, RunResult, Summary};
pub use preset::{preset, presets, Preset, PRESET_NAMES};
pub use scenario::{Protocol, Scenario, ScenarioError, TopologyKind, Traffic};
pub use sweep::{sweep, SweepCell, SweepResult, SweepRun};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Scenario(_) => 2,
            _ => 3,
        }
    }
}
