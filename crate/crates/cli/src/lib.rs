//! Scenario files, presets and the commands behind the `cranelab` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod presets;

pub use config::ScenarioConfig;
pub use error::CliError;
