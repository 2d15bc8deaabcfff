use serde::{Deserialize, Serialize};

use crate::dovs::DovsParams;
use crate::kinematics::{admissible, propagate_unicycle, KinodynamicLimits, Pose, Velocity};
use crate::sim::reward::RewardParams;
use crate::sim::sensing::SensorConfig;
use crate::sim::SimError;

/// Axis-aligned walled rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Arena {
    fn default() -> Self {
        Self {
            x_min: -4.0,
            x_max: 4.0,
            y_min: -4.0,
            y_max: 4.0,
        }
    }
}

impl Arena {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Whether a disc lies strictly inside the walls.
    pub fn contains_disc(&self, x: f64, y: f64, r: f64) -> bool {
        x - r > self.x_min && x + r < self.x_max && y - r > self.y_min && y + r < self.y_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleBody {
    pub pose: Pose<f64>,
    pub radius: f64,
    /// Fixed for the whole episode; zero for static obstacles.
    pub commanded: Velocity<f64>,
    pub kind: ObstacleKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose<f64>,
    pub vel: Velocity<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Running,
    Success,
    Collision,
    Timeout,
}

impl EpisodeStatus {
    pub fn is_terminal(self) -> bool {
        self != EpisodeStatus::Running
    }
}

/// Everything the simulator needs besides the world itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub limits: KinodynamicLimits<f64>,
    pub dovs: DovsParams<f64>,
    pub arena: Arena,
    pub robot_radius: f64,
    pub obstacle_radius_min: f64,
    pub obstacle_radius_max: f64,
    pub dynamic_v_min: f64,
    pub dynamic_v_max: f64,
    pub dynamic_w_max: f64,
    pub max_steps: u32,
    /// Collision checks per control period (the last one at the period end).
    pub collision_samples: u32,
    /// Minimum gap between spawned obstacles, and between obstacles and the
    /// robot disc placed at the goal.
    pub spawn_clearance: f64,
    /// Minimum gap between the robot and any obstacle at spawn.
    pub robot_clearance: f64,
    /// Robot and goal are spawned at least this far from the walls.
    pub wall_margin: f64,
    pub reward: RewardParams,
    pub sensor: SensorConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            limits: KinodynamicLimits::default(),
            dovs: DovsParams::default(),
            arena: Arena::default(),
            robot_radius: 0.18,
            obstacle_radius_min: 0.1,
            obstacle_radius_max: 0.3,
            dynamic_v_min: 0.1,
            dynamic_v_max: 0.6,
            dynamic_w_max: 0.5,
            max_steps: 500,
            collision_samples: 5,
            spawn_clearance: 0.1,
            robot_clearance: 0.5,
            wall_margin: 0.5,
            reward: RewardParams::default(),
            sensor: SensorConfig::default(),
        }
    }
}

/// Ground-truth simulation state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub robot: RobotState,
    pub goal: (f64, f64),
    pub obstacles: Vec<ObstacleBody>,
    pub arena: Arena,
    pub step_count: u32,
    /// Seed of the sensing noise stream for this episode.
    pub seed: u64,
}

impl World {
    pub fn goal_distance(&self) -> f64 {
        self.robot.pose.distance_to(self.goal.0, self.goal.1)
    }

    /// Boundary distance between the robot disc and the closest obstacle
    /// disc; infinite without obstacles, negative when overlapping.
    pub fn obstacle_distance(&self) -> f64 {
        self.obstacles
            .iter()
            .map(|o| self.robot.pose.distance_to(o.pose.x, o.pose.y) - o.radius - self.robot.radius)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn in_collision(&self) -> bool {
        let p = self.robot.pose;
        !self.arena.contains_disc(p.x, p.y, self.robot.radius) || self.obstacle_distance() < 0.0
    }

    /// Episode status implied by the world state alone.
    pub fn status(&self, cfg: &SimConfig) -> EpisodeStatus {
        if self.in_collision() {
            EpisodeStatus::Collision
        } else if self.goal_distance() < cfg.reward.goal_distance_threshold
            && self.robot.vel.v < cfg.reward.goal_speed_threshold
        {
            EpisodeStatus::Success
        } else if self.step_count >= cfg.max_steps {
            EpisodeStatus::Timeout
        } else {
            EpisodeStatus::Running
        }
    }
}

/// Advance an obstacle by `dt`, reflecting its heading at the walls.
pub(crate) fn advance_obstacle(o: &mut ObstacleBody, arena: &Arena, dt: f64) {
    if o.kind == ObstacleKind::Static {
        return;
    }
    let mut p = propagate_unicycle(o.pose, o.commanded, dt);
    let r = o.radius;
    let (lo_x, hi_x) = (arena.x_min + r, arena.x_max - r);
    let (lo_y, hi_y) = (arena.y_min + r, arena.y_max - r);
    let mut theta = p.theta;
    if p.x < lo_x || p.x > hi_x {
        let wall = if p.x < lo_x { lo_x } else { hi_x };
        p.x = (2.0 * wall - p.x).clamp(lo_x, hi_x);
        theta = std::f64::consts::PI - theta;
    }
    if p.y < lo_y || p.y > hi_y {
        let wall = if p.y < lo_y { lo_y } else { hi_y };
        p.y = (2.0 * wall - p.y).clamp(lo_y, hi_y);
        theta = -theta;
    }
    o.pose = Pose::new(p.x, p.y, theta);
}

/// Slack on the one-period acceleration bound, for rounding only.
pub const ENVELOPE_TOL: f64 = 1e-9;

fn nearly_admissible(cmd: Velocity<f64>, lim: &KinodynamicLimits<f64>) -> bool {
    admissible(cmd, lim)
        || (cmd.v >= -ENVELOPE_TOL
            && cmd.v <= lim.v_max + ENVELOPE_TOL
            && cmd.w.abs() <= lim.w_max + ENVELOPE_TOL
            && cmd.v / lim.v_max + cmd.w.abs() / lim.w_max <= 1.0 + ENVELOPE_TOL)
}

/// Apply one control period. The robot follows `cmd` exactly along its arc;
/// collisions are checked at `collision_samples` evenly spaced instants and
/// the world stops at the first colliding one.
pub fn step_world(world: &mut World, cmd: Velocity<f64>, cfg: &SimConfig) -> Result<EpisodeStatus, SimError> {
    let status = world.status(cfg);
    if status.is_terminal() {
        return Err(SimError::NotRunning(status));
    }
    let lim = &cfg.limits;
    if !lim.within_envelope(world.robot.vel, cmd, ENVELOPE_TOL) || !nearly_admissible(cmd, lim) {
        return Err(SimError::CommandOutOfEnvelope {
            current: world.robot.vel,
            command: cmd,
        });
    }

    let start = world.robot.pose;
    let n = cfg.collision_samples.max(1);
    let sub_dt = lim.dt / n as f64;
    world.robot.vel = cmd;
    for k in 1..=n {
        world.robot.pose = propagate_unicycle(start, cmd, lim.dt * k as f64 / n as f64);
        for o in world.obstacles.iter_mut() {
            advance_obstacle(o, &world.arena, sub_dt);
        }
        if world.in_collision() {
            break;
        }
    }
    world.step_count += 1;
    Ok(world.status(cfg))
}
