//! Experiment harness for the equalized-odds auditors: dataset ingestion,
//! parameter sweeps, result aggregation and the `audit-lab` command line.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod lower_bound;
pub mod results;
pub mod sweep;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use results::ResultRow;
