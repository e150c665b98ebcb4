//! Scenario runner for the shrinkerlab flow laboratory: config parsing,
//! experiment pipelines and reproducible output directories.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod runner;

pub use config::{parse_config, CurveSpec, Scenario, ScenarioConfig};
pub use error::{LabError, Result};
pub use runner::{run, RunOutcome};
