//! Experiment plumbing: configuration, commands and artifact writers.

pub mod config;
pub mod nash;
pub mod output;
pub mod run;
pub mod verify;

pub use config::{load_config, ExperimentConfig};
pub use nash::{cmd_nash, NashReport};
pub use output::{emit_csv, emit_svg, read_csv, Chart, MetricsRow, Series};
pub use run::{cmd_run, cmd_sweep_alpha, RunArtifacts, SweepArtifacts, SweepSummary};
pub use verify::{cmd_verify, Level, VerifyReport};
