//! The single JSON document that parameterizes simulation, learning,
//! curriculum and evaluation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{default_stages, CurriculumStage, Hyperparams};
use crate::sim::SimConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerId {
    DqnDovs,
    GoalGreedy,
    Random,
}

impl PlannerId {
    pub fn name(self) -> &'static str {
        match self {
            PlannerId::DqnDovs => "dqn-dovs",
            PlannerId::GoalGreedy => "goal-greedy",
            PlannerId::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub obstacle_counts: Vec<usize>,
    pub episodes: usize,
    pub dynamic_fraction: f64,
    pub checkpoint: Option<PathBuf>,
    pub seed: u64,
    pub planner: PlannerId,
    /// Planner whose solve times anchor `time_rate`.
    pub reference: Option<PlannerId>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            obstacle_counts: (1..=15).collect(),
            episodes: 200,
            dynamic_fraction: 0.85,
            checkpoint: None,
            seed: 0,
            planner: PlannerId::DqnDovs,
            reference: None,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.episodes == 0 {
            return Err(ConfigError::Invalid("benchmark.episodes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.dynamic_fraction) {
            return Err(ConfigError::Invalid("benchmark.dynamic_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub sim: SimConfig,
    pub agent: Hyperparams,
    pub curriculum: Vec<CurriculumStage>,
    pub benchmark: BenchmarkConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            agent: Hyperparams::default(),
            curriculum: default_stages(),
            benchmark: BenchmarkConfig::default(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, ConfigError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sim
            .limits
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("sim.limits: {e}")))?;
        if self.agent.n_step == 0 || self.agent.batch_size == 0 || self.agent.replay_capacity == 0 {
            return Err(ConfigError::Invalid("agent.n_step, batch_size and replay_capacity must be positive".into()));
        }
        if self.curriculum.is_empty() {
            return Err(ConfigError::Invalid("curriculum has no stages".into()));
        }
        self.benchmark.validate()
    }

    /// Every stage shortened by `factor` (at least one episode each).
    pub fn scaled_curriculum(&self, factor: f64) -> Self {
        Self {
            curriculum: self.curriculum.iter().map(|s| s.scaled(factor)).collect(),
            ..self.clone()
        }
    }
}
