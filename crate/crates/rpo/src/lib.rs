//! Experiment harness for `rpo-core`: environment specs, configuration and
//! file formats, multi-trial runs with CSV outputs, estimator diagnostics and
//! plot data.

pub mod config;
pub mod diag;
pub mod env;
pub mod error;
pub mod formats;
pub mod harness;
pub mod plot;

pub use config::ExperimentConfig;
pub use env::Environment;
pub use error::{HarnessError, Result};
