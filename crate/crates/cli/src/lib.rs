//! Library side of the `zadr` command: config handling, the experiment
//! driver and the result writers.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{load_config, parse_config, ExperimentConfig, InputSource, Overrides, SyntheticInput};
pub use error::CliError;
pub use output::{RunManifest, RunStatus};
pub use run::run_experiment;
