//! Experiment driver: configuration files, the fixture registry, the grid
//! runner and its CSV/JSON outputs.

pub mod config;
pub mod fixtures;
pub mod output;
pub mod report;
pub mod runner;

pub use config::ExperimentConfig;
pub use runner::{run_experiment, ResultRow, RunOutput};

use ctlab_core::CtlabError;

/// Process exit status for an error: 2 for bad configuration or inputs the
/// user controls, 3 for exceeded budgets, 1 otherwise.
pub fn exit_code(e: &CtlabError) -> i32 {
    match e {
        CtlabError::InvalidConfig(_) => 2,
        CtlabError::BudgetExceeded(_) => 3,
        _ => 1,
    }
}
