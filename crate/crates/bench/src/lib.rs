//! Benchmark harness for the bimanual planner: scenario configs with goal
//! randomization, batch-size sweeps, per-episode and summary CSV reports.

pub mod config;
pub mod error;
pub mod metrics;
pub mod suite;

pub use config::{child_seed, goal_seed, Goal, ScenarioConfig, SCHEMA_VERSION};
pub use error::{BenchError, Result};
pub use metrics::{compute_metrics, mean_std, summarize_runs, MetricsSummary, RunMoments};
pub use suite::{run_episodes, run_suite, summarize, EpisodeRow, SuiteOptions, SuiteReport, SummaryRow};
