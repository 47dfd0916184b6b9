//! Experiment pipeline around the `decision_factor` library: JSON configs,
//! staged runs with derived seeds, report files, and the acceptance bench.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{DatasetSource, ExperimentConfig, MetricKind, SolverChoice};
pub use error::{PipelineError, Stage};
pub use pipeline::{emit_report, load_report, run_experiment, run_with, RunOptions, RunReport};
