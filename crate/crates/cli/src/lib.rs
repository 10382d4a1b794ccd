//! Command implementations behind the `episurvey` binary.

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{cmd_evaluate, cmd_simulate, cmd_synth, cmd_variance};
pub use config::{Config, Overrides};
pub use manifest::RunManifest;
