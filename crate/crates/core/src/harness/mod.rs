//! Experiment plumbing: configuration, CSV streams, the run loop and metrics.

pub mod config;
pub mod csvio;
pub mod metrics;
pub mod runner;

pub use config::{ConfigError, RunConfig, RunMode};
pub use csvio::{ingest_csv, read_stream, CsvError, StreamRow, StreamWriter};
pub use metrics::{convergence_time, MetricsReport};
pub use runner::{run_experiment, RunError, Runner, StepRecord};
