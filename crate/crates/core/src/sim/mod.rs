//! Seeded 2-D world: walled arena, disc obstacles with constant commands,
//! sensing emulation, reward and episode lifecycle.

pub mod reward;
pub mod sensing;
pub mod spawn;
pub mod trace;
pub mod world;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::actions::{enumerate_actions, ActionSlot, ActionTable};
use crate::dovs::{build_state_vector, build_velocity_grid, ObstacleEstimate, RobotSituation, StateVector};
use crate::kinematics::{dynamic_window, goal_arc, DynamicWindow, GoalArc, Velocity};

pub use reward::{reward, safedist_term, shaping_reward, RewardParams};
pub use sensing::{sense, SensorConfig};
pub use spawn::{derive_seed, spawn_scenario, ObstacleMix, ScenarioSpec, MAX_SPAWN_ATTEMPTS};
pub use world::{step_world, Arena, EpisodeStatus, ObstacleBody, ObstacleKind, RobotState, SimConfig, World};
pub use trace::{StepRecord, Trace, TraceLine};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("could not place the {0} after {MAX_SPAWN_ATTEMPTS} attempts")]
    SpawnFailure(&'static str),
    #[error("command {command:?} is not reachable from {current:?} in one period")]
    CommandOutOfEnvelope {
        current: Velocity<f64>,
        command: Velocity<f64>,
    },
    #[error("episode already ended ({0:?})")]
    NotRunning(EpisodeStatus),
    #[error(transparent)]
    Action(#[from] crate::actions::ActionError),
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What the planner sees at one control step.
#[derive(Debug, Clone)]
pub struct Observation {
    pub state: StateVector<f64>,
    pub actions: ActionTable<f64>,
    pub window: DynamicWindow<f64>,
    pub arc: GoalArc<f64>,
    pub estimates: Vec<ObstacleEstimate<f64>>,
}

/// Sense the world and assemble the state and action table.
pub fn observe(world: &World, cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Observation {
    let estimates = sense(world, &cfg.sensor, rng);
    let pose = world.robot.pose;
    let grid = build_velocity_grid(pose, &estimates, &cfg.limits, &cfg.dovs);
    let situation = RobotSituation::observe(pose, world.robot.vel, world.goal, &estimates, &cfg.limits, cfg.dovs.d_norm);
    let window = dynamic_window(world.robot.vel, &cfg.limits);
    let (gx, gy) = pose.to_local(world.goal.0, world.goal.1);
    let arc = goal_arc(gx, gy).unwrap_or(GoalArc::Straight);
    let actions = enumerate_actions(&window, &arc, &cfg.limits);
    Observation {
        state: build_state_vector(grid, situation),
        actions,
        window,
        arc,
        estimates,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub status: EpisodeStatus,
}

/// One episode: a world, its configuration and its sensing noise stream.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: SimConfig,
    world: World,
    rng: ChaCha8Rng,
    status: EpisodeStatus,
}

impl Env {
    pub fn new(world: World, cfg: SimConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(world.seed);
        let status = world.status(&cfg);
        Self { cfg, world, rng, status }
    }

    pub fn spawn(spec: &ScenarioSpec, seed: u64, cfg: SimConfig) -> Result<Self, SimError> {
        let world = spawn_scenario(spec, seed, &cfg)?;
        Ok(Self::new(world, cfg))
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn status(&self) -> EpisodeStatus {
        self.status
    }

    pub fn observe(&mut self) -> Observation {
        observe(&self.world, &self.cfg, &mut self.rng)
    }

    pub fn step(&mut self, cmd: Velocity<f64>) -> Result<StepOutcome, SimError> {
        let prev = self.world.clone();
        let status = step_world(&mut self.world, cmd, &self.cfg)?;
        self.status = status;
        Ok(StepOutcome {
            reward: reward(&prev, &self.world, status, &self.cfg.reward),
            status,
        })
    }

    pub fn step_action(&mut self, table: &ActionTable<f64>, slot: ActionSlot) -> Result<StepOutcome, SimError> {
        let cmd = table.command(slot)?;
        self.step(cmd)
    }
}
