//! Experiment driver for `stackseek`: config parsing, runs, audits and
//! reference oracles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod config;
pub mod oracle;
pub mod output;
pub mod run;
pub mod scenario;

pub use check::{run_checks, Audit};
pub use config::{ConfigError, ExperimentConfig, RegimeKind, ScenarioKind};
pub use oracle::{compute_oracle, write_oracle, OracleReport};
pub use run::{run_experiment, RunMetrics, RunOverrides};
