//! Experiment runner for the two-phase Stefan toolkit: TOML scenario
//! configs, run directories with manifests, presets, solver cross-checks
//! and robust-law sweeps.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use commands::{run_scenario, RunOutcome};
pub use config::{output_root, Overrides, ScenarioConfig};
pub use error::CliError;
pub use manifest::{RunManifest, Termination};
