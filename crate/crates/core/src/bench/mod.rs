//! Monte Carlo scenario runner: configuration, per-trial pipeline, aggregation and output.

pub mod config;
pub mod metrics;
pub mod output;
pub mod pipeline;
pub mod runner;

pub use config::{ScenarioConfig, SweepAxis};
pub use metrics::{compute_rmse, compute_snr, match_sources, RmseSummary};
pub use output::{emit_outputs, read_table, write_trials};
pub use pipeline::{run_trial, TrialResult, TrialSeeds};
pub use runner::{run_scenario, RmseRow, RmseTable, ScenarioRun};
