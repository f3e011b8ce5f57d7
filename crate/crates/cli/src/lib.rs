//! Command-line driver: configuration, presets, experiment dispatch and
//! output encoding for the `saser` binary.

pub mod config;
pub mod error;
pub mod fitcmd;
pub mod guard;
pub mod output;
pub mod presets;
pub mod run;

pub use config::{load, load_config, Axis, Experiment, Format, Options, Request, RunSpec, Solver, Spacing};
pub use error::{exit, CliError, Result};
pub use output::{write_output, GridResult};
pub use run::run_experiment;
