//! Experiment harness: scenario sampling, evaluation episodes, metrics,
//! sweeps, learner training and file export behind the `ste` binary.

pub mod config;
pub mod episode;
pub mod error;
pub mod export;
pub mod metrics;
pub mod scenario;
pub mod seeds;
pub mod sweep;
pub mod train;

pub use config::{PolicySpec, RunConfig, ScenarioDistributions, SweepConfig, TrainConfig};
pub use episode::{run_episode, EpisodeRecord, Policy, StepTrace};
pub use error::{HarnessError, Result};
pub use metrics::{aggregate_metrics, MetricsSummary};
pub use scenario::{sample_scenario, Scenario};
pub use sweep::{run_cell, run_sweep, CellOutcome, CellResult};
