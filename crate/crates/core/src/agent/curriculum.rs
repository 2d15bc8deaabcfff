use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{Agent, AgentError, Hyperparams, Transition};
use crate::nn::{load_weights, save_weights};
use crate::sim::{derive_seed, EpisodeStatus, Env, ObstacleMix, ScenarioSpec, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EpsilonMode {
    /// Linear from 1 to the floor, restarted at every decaying stage.
    Decay,
    Fixed { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObstacleSchedule {
    Fixed { count: usize },
    /// Grows linearly from `from` at the first episode to `to` at the last.
    Ramp { from: usize, to: usize },
    /// Uniform in `min..=max` every episode.
    Random { min: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumStage {
    pub episodes: usize,
    pub goal_min: f64,
    /// Largest goal distance at the first and at the last episode of the
    /// stage; `None` means anywhere in the arena.
    pub goal_max_start: Option<f64>,
    pub goal_max_end: Option<f64>,
    pub epsilon: EpsilonMode,
    pub obstacles: ObstacleSchedule,
    pub mix: ObstacleMix,
}

impl CurriculumStage {
    fn progress(&self, episode: usize) -> f64 {
        if self.episodes <= 1 {
            1.0
        } else {
            (episode as f64 / (self.episodes - 1) as f64).min(1.0)
        }
    }

    /// Scenario of one episode. `Random` obstacle counts are left to the
    /// spawner as a range.
    pub fn scenario(&self, episode: usize, cfg: &SimConfig) -> ScenarioSpec {
        let t = self.progress(episode);
        let goal_max = match (self.goal_max_start, self.goal_max_end) {
            (Some(a), Some(b)) => Some(a + (b - a) * t),
            (Some(a), None) => {
                let m = cfg.wall_margin.max(cfg.robot_radius);
                let far = (cfg.arena.width() - 2.0 * m).hypot(cfg.arena.height() - 2.0 * m);
                let d = a + (far - a) * t;
                if t >= 1.0 {
                    None
                } else {
                    Some(d)
                }
            }
            (None, _) => None,
        };
        let (lo, hi) = match self.obstacles {
            ObstacleSchedule::Fixed { count } => (count, count),
            ObstacleSchedule::Ramp { from, to } => {
                let n = (from as f64 + (to as f64 - from as f64) * t).round() as usize;
                (n, n)
            }
            ObstacleSchedule::Random { min, max } => (min, max),
        };
        ScenarioSpec {
            obstacles_min: lo,
            obstacles_max: hi,
            mix: self.mix,
            goal_distance_min: self.goal_min,
            goal_distance_max: goal_max,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            episodes: ((self.episodes as f64 * factor).round() as usize).max(1),
            ..*self
        }
    }
}

/// The six default stages.
pub fn default_stages() -> Vec<CurriculumStage> {
    let any = |episodes, epsilon, obstacles, mix| CurriculumStage {
        episodes,
        goal_min: 1.0,
        goal_max_start: None,
        goal_max_end: None,
        epsilon,
        obstacles,
        mix,
    };
    let decay = EpsilonMode::Decay;
    let fixed = EpsilonMode::Fixed { value: 0.05 };
    let ramp = ObstacleSchedule::Ramp { from: 0, to: 12 };
    vec![
        CurriculumStage {
            episodes: 1000,
            goal_min: 1.0,
            goal_max_start: Some(1.5),
            goal_max_end: None,
            epsilon: decay,
            obstacles: ObstacleSchedule::Fixed { count: 0 },
            mix: ObstacleMix::None,
        },
        any(1000, decay, ramp, ObstacleMix::Static),
        any(1000, fixed, ramp, ObstacleMix::Static),
        any(1000, decay, ramp, ObstacleMix::Dynamic),
        any(1000, fixed, ramp, ObstacleMix::Dynamic),
        any(
            2500,
            fixed,
            ObstacleSchedule::Random { min: 0, max: 12 },
            ObstacleMix::Mixed { dynamic_fraction: 0.85 },
        ),
    ]
}

pub fn epsilon_schedule(stage: &CurriculumStage, episode: usize, hp: &Hyperparams) -> f64 {
    match stage.epsilon {
        EpsilonMode::Fixed { value } => value,
        EpsilonMode::Decay => {
            let span = hp.epsilon_decay_fraction * stage.episodes as f64;
            let frac = if span > 0.0 { episode as f64 / span } else { 1.0 };
            if frac >= 1.0 {
                hp.epsilon_floor
            } else {
                1.0 + (hp.epsilon_floor - 1.0) * frac
            }
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub stage: usize,
    pub episode: usize,
    pub global_episode: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub outcome: EpisodeStatus,
    pub steps: u32,
    pub epsilon: f64,
    pub obstacles: usize,
    pub train_steps: u64,
    pub mean_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub final_checkpoint: PathBuf,
    pub stage_checkpoints: Vec<PathBuf>,
    pub log: PathBuf,
    pub records: Vec<EpisodeRecord>,
    /// Hex SHA-256 of the final checkpoint file.
    pub checkpoint_sha256: String,
    pub agent: Agent,
}

/// Rough episode length used to size the annealing horizon.
pub const EXPECTED_EPISODE_STEPS: u64 = 100;

/// Run every stage in order. Writes `train_log.jsonl`, `stage{k}.ckpt` per
/// stage and `final.ckpt` into `out_dir`. `resume` seeds the online
/// network and optimizer from a checkpoint.
pub fn run_curriculum(
    sim: &SimConfig,
    hp: &Hyperparams,
    stages: &[CurriculumStage],
    seed: u64,
    out_dir: &Path,
    resume: Option<&Path>,
    mut observer: impl FnMut(&EpisodeRecord),
) -> Result<TrainOutput, AgentError> {
    fs::create_dir_all(out_dir)?;
    let total_episodes: usize = stages.iter().map(|s| s.episodes).sum();
    let anneal = hp
        .anneal_steps
        .unwrap_or(total_episodes as u64 * EXPECTED_EPISODE_STEPS / hp.train_every.max(1));
    let mut agent = Agent::new(hp.clone(), anneal, derive_seed(&[seed, 0]));
    if let Some(path) = resume {
        let (net, opt) = load_weights::<f64, _>(path, &hp.arch)?;
        agent = Agent::with_network(hp.clone(), net, anneal, ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0])));
        agent.opt = opt;
    }

    let log_path = out_dir.join("train_log.jsonl");
    let mut log = BufWriter::new(File::create(&log_path)?);
    let mut records = Vec::with_capacity(total_episodes);
    let mut stage_checkpoints = Vec::new();
    let mut env_steps: u64 = 0;
    let mut global = 0usize;

    for (si, stage) in stages.iter().enumerate() {
        for ep in 0..stage.episodes {
            let spec = stage.scenario(ep, sim);
            let epsilon = epsilon_schedule(stage, ep, hp);
            let mut env = Env::spawn(&spec, derive_seed(&[seed, 1, global as u64]), sim.clone())?;
            let obstacles = env.world().obstacles.len();
            let mut obs = env.observe();
            let mut ret = 0.0;
            let (mut loss_sum, mut loss_n) = (0.0, 0u64);
            loop {
                let action = agent.act(&obs.state, &obs.actions.mask, epsilon)?;
                let out = env.step(obs.actions.commands[action])?;
                ret += out.reward;
                let terminal = matches!(out.status, EpisodeStatus::Success | EpisodeStatus::Collision);
                let done = out.status.is_terminal();
                let next = if terminal { None } else { Some(env.observe()) };
                let (next_state, next_mask) = match &next {
                    Some(o) => (o.state.clone(), o.actions.mask),
                    None => (obs.state.clone(), obs.actions.mask),
                };
                agent.remember(
                    Transition {
                        state: obs.state.clone(),
                        action,
                        reward: out.reward,
                        next_state,
                        terminal,
                        next_mask,
                    },
                    done,
                )?;
                env_steps += 1;
                if env_steps.is_multiple_of(hp.train_every.max(1)) && agent.ready() {
                    loss_sum += agent.train_step()?;
                    loss_n += 1;
                }
                match next {
                    Some(o) if !done => obs = o,
                    _ => break,
                }
            }
            let record = EpisodeRecord {
                stage: si + 1,
                episode: ep,
                global_episode: global,
                ret,
                outcome: env.status(),
                steps: env.world().step_count,
                epsilon,
                obstacles,
                train_steps: agent.train_steps,
                mean_loss: (loss_n > 0).then(|| loss_sum / loss_n as f64),
            };
            serde_json::to_writer(&mut log, &record).map_err(std::io::Error::from)?;
            log.write_all(b"\n")?;
            observer(&record);
            records.push(record);
            global += 1;
        }
        let path = out_dir.join(format!("stage{}.ckpt", si + 1));
        save_weights(&path, &agent.online, &agent.opt)?;
        stage_checkpoints.push(path);
    }
    log.flush()?;

    let final_checkpoint = out_dir.join("final.ckpt");
    save_weights(&final_checkpoint, &agent.online, &agent.opt)?;
    let bytes = fs::read(&final_checkpoint)?;
    let checkpoint_sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    Ok(TrainOutput {
        final_checkpoint,
        stage_checkpoints,
        log: log_path,
        records,
        checkpoint_sha256,
        agent,
    })
}
