//! Experiment driver for TNF spectral clustering: config files, batch runs,
//! result tables and plots.

pub mod config;
pub mod error;
pub mod plot;
pub mod report;
pub mod runner;

pub use config::{DatasetSource, DatasetSpec, EpsilonSpec, ExperimentConfig, TableFormat};
pub use error::{Error, Result};
pub use runner::{persist, run, CellOutput, ResultRecord, RunOutput};
