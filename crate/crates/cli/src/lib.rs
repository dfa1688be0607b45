//! Experiment runner for averaged-kernel mollifiers: configurations,
//! the convergence, a.e.-convergence and divergence experiments, hypothesis
//! checks, suites, and CSV/SVG report output.

pub mod config;
pub mod error;
pub mod experiments;
pub mod plot;
pub mod report;
pub mod suite;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use report::ExperimentReport;
