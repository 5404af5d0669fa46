//! Config-driven experiment runner on top of `pullback-core`: named
//! experiments, offset sweeps, cached boundary trajectories, CSV/SVG output
//! and run records.

// `!(x > 0.0)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod config;
pub mod experiments;
pub mod plot;
pub mod record;
pub mod sweep;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] pullback_core::Error),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub use config::ExperimentConfig;
pub use experiments::run_experiment;
pub use record::{Assertion, RunRecord};
