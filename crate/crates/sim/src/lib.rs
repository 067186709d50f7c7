//! IO, configuration, and orchestration around `ppsl-core`: TOML
//! experiment configs, the round-loop runner, CSV/manifest artifacts, and
//! edge-list graph files. The `ppsl` binary exposes all of it as a CLI.

pub mod config;
pub mod edgelist;
pub mod output;
pub mod runner;

pub use config::{ExperimentConfig, ResolvedParams};
pub use output::{run_experiment, run_sweep};
pub use runner::{prepare, run_single, PreparedRun};
