//! Experiment runner: configuration, exponent fits, diagnostics, export and
//! the acceptance driver.

pub mod acceptance;
pub mod bias;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod export;
pub mod fit;
pub mod run;

pub use config::{ExperimentConfig, Quantity};
pub use error::{Result, RunnerError};
