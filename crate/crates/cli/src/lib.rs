//! Configuration, orchestration and file output for the `cdme` command.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{
    cmd_compare, cmd_simulate_mc, cmd_solve_cme, cmd_solve_hierarchy, cmd_transfer_check,
    CompareOutcome, CompareReport, CompareSettings, Experiment, Model, TransferParams,
    OUTPUT_DIR_ENV,
};
pub use config::{ConfigError, ExperimentConfig};
pub use error::{CliError, CliResult, EXIT_COMPARISON_FAILED, EXIT_ERROR, EXIT_OK};
pub use output::{OutputDir, RunManifest};
