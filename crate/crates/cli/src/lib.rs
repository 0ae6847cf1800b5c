//! Experiment harness over the solver library: configuration, metrics,
//! synthetic datasets, experiment runners and report serialization. The
//! `gtf` binary is a thin command layer over this crate.

pub mod config;
pub mod datasets;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod report;

pub use config::{Method, RunConfig};
pub use error::{HarnessError, Result};
pub use report::ExperimentReport;
