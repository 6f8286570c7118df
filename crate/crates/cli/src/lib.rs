//! Experiment runner for multilevel SVGD: configuration, run reports,
//! reference chains, comparison tables and the bounds table.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds_table;
pub mod compare;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod reference;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use report::RunReport;
