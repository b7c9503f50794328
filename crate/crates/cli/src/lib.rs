//! Experiment driver for product-kernel operator learning: data generation,
//! training, validation, comparison against the single-kernel baseline, and
//! benchmarking.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use error::CliError;
