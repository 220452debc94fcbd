//! Experiment harness: configs, Monte-Carlo sweeps, result files and the CLI.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod output;
pub mod stats;
pub mod validate;

pub use config::{ExperimentConfig, Preset, Scheme, SweepAxis};
pub use experiment::{run_experiment, slot_stream, MetricsRow, RunMetrics};
pub use output::{emit_outputs, parse_metrics_csv, read_metrics_csv, render_svg};
