//! Experiment harness around `seq-uq`: configuration, file formats and the
//! synth / decode / score / eval / oracle / sweep stages.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod rows;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use pipeline::{EvalTask, Runner};
