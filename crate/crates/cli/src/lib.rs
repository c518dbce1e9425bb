//! Configuration-driven runner for the quasi-stationary state simulator.
//!
//! [`run::run_experiment`] turns an [`config::ExperimentConfig`] into a set
//! of CSV tables plus a JSON manifest, and [`verify::verify`] runs the
//! invariant suite. The `qss` binary wraps both.

pub mod config;
pub mod error;
pub mod manifest;
pub mod presets;
pub mod run;
pub mod table;
pub mod verify;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use presets::Preset;
