//! Experiment plumbing: TOML configs, single runs, sweeps, metrics tables,
//! empirical CDFs, SVG plots and a brute-force oracle for tiny instances.

pub mod cdf;
pub mod config;
pub mod data;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod plot;
pub mod run;
pub mod sweep;

pub use config::{DataConfig, DataSource, ExperimentConfig, ExperimentSection, FieldError};
pub use error::{HarnessError, Result};
pub use metrics::{MetricRow, MetricsTable, Summary};
pub use oracle::{oracle, ClassifierModel, OracleResult, OracleSpec};
pub use run::{run, Check, RunOptions, RunOutcome};
pub use sweep::{sweep, SweepKey, SweepResult, SweepSpec};
