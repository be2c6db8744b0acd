//! Batch front-end for the optomotor library: presets, config handling and
//! the spectrum / evolve / g2 commands with CSV, JSON and SVG emission.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{
    run_evolve_command, run_g2_command, run_spectrum_command, CliError, CliResult, GuardReport,
};
pub use config::{preset, preset_summary, RunConfig, PRESET_NAMES};
