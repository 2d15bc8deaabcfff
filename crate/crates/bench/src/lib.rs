//! Evaluation harness for the DQN-DOVS planner: shared-scenario benchmark,
//! baseline planners, metric reports and trajectory plots.

pub mod bench;
pub mod planner;
pub mod report;
pub mod svg;

use thiserror::Error;

pub use bench::{aggregate, run_benchmark, BenchmarkRun, EpisodeResult, MetricsRow, Planner};
pub use planner::{baseline_goal_greedy, baseline_random, dqn_action};
pub use report::{emit_report, ReportFormat};
pub use svg::export_trajectory_svg;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] dovs_core::config::ConfigError),
    #[error(transparent)]
    Nn(#[from] dovs_core::nn::NnError),
    #[error(transparent)]
    Sim(#[from] dovs_core::sim::SimError),
    #[error(transparent)]
    Agent(#[from] dovs_core::agent::AgentError),
    #[error("no metric rows to report")]
    EmptyReport,
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
