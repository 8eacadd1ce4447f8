//! Experiment harness for the `ris-jrc` simulator: TOML configuration,
//! sweep orchestration with reproducible random streams, and CSV output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{Config, ConfigError};
pub use experiment::{run_experiment, ExperimentKind, ExperimentOutput, ExperimentPlan, HarnessError};
pub use output::{emit_csv, ResultRow, ResultTable};
