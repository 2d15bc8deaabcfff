use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kinematics::{Pose, Velocity};
use crate::sim::world::{ObstacleBody, ObstacleKind, RobotState, SimConfig, World};
use crate::sim::SimError;

/// Rejection-sampling budget of one scenario.
pub const MAX_SPAWN_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObstacleMix {
    None,
    Static,
    Dynamic,
    /// `round(fraction * count)` dynamic obstacles, the rest static.
    Mixed { dynamic_fraction: f64 },
}

impl ObstacleMix {
    pub fn dynamic_count(&self, count: usize) -> usize {
        match *self {
            ObstacleMix::None | ObstacleMix::Static => 0,
            ObstacleMix::Dynamic => count,
            ObstacleMix::Mixed { dynamic_fraction } => {
                ((dynamic_fraction.clamp(0.0, 1.0) * count as f64).round() as usize).min(count)
            }
        }
    }
}

/// What one episode should look like.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Inclusive range, drawn uniformly.
    pub obstacles_min: usize,
    pub obstacles_max: usize,
    pub mix: ObstacleMix,
    pub goal_distance_min: f64,
    /// `None` means any distance the arena allows.
    pub goal_distance_max: Option<f64>,
}

impl ScenarioSpec {
    pub fn empty(goal_min: f64, goal_max: Option<f64>) -> Self {
        Self {
            obstacles_min: 0,
            obstacles_max: 0,
            mix: ObstacleMix::None,
            goal_distance_min: goal_min,
            goal_distance_max: goal_max,
        }
    }

    pub fn with_obstacles(count: usize, mix: ObstacleMix) -> Self {
        Self {
            obstacles_min: count,
            obstacles_max: count,
            mix,
            goal_distance_min: 1.0,
            goal_distance_max: None,
        }
    }
}

/// Sample a world. Positions are rejection-sampled so nothing overlaps at
/// spawn; the same seed always yields the same world.
pub fn spawn_scenario(spec: &ScenarioSpec, seed: u64, cfg: &SimConfig) -> Result<World, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arena = cfg.arena;
    let m = cfg.wall_margin.max(cfg.robot_radius);
    let mut attempts = 0usize;
    let mut budget = |what: &'static str| -> Result<(), SimError> {
        attempts += 1;
        if attempts > MAX_SPAWN_ATTEMPTS {
            Err(SimError::SpawnFailure(what))
        } else {
            Ok(())
        }
    };

    let rx = rng.random_range(arena.x_min + m..arena.x_max - m);
    let ry = rng.random_range(arena.y_min + m..arena.y_max - m);
    let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);

    let goal = loop {
        budget("goal")?;
        let (gx, gy) = match spec.goal_distance_max {
            Some(max) => {
                let d = rng.random_range(spec.goal_distance_min..=max.max(spec.goal_distance_min));
                let a = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                (rx + d * a.cos(), ry + d * a.sin())
            }
            None => (
                rng.random_range(arena.x_min + m..arena.x_max - m),
                rng.random_range(arena.y_min + m..arena.y_max - m),
            ),
        };
        let inside = gx > arena.x_min + m && gx < arena.x_max - m && gy > arena.y_min + m && gy < arena.y_max - m;
        let d = (gx - rx).hypot(gy - ry);
        if inside && d >= spec.goal_distance_min && spec.goal_distance_max.is_none_or(|max| d <= max + 1e-12) {
            break (gx, gy);
        }
    };

    let count = if spec.obstacles_max > spec.obstacles_min {
        rng.random_range(spec.obstacles_min..=spec.obstacles_max)
    } else {
        spec.obstacles_min
    };
    let n_dynamic = spec.mix.dynamic_count(count);
    let mut obstacles: Vec<ObstacleBody> = Vec::with_capacity(count);
    for k in 0..count {
        let kind = if k < n_dynamic { ObstacleKind::Dynamic } else { ObstacleKind::Static };
        let body = loop {
            budget("obstacles")?;
            let r = rng.random_range(cfg.obstacle_radius_min..=cfg.obstacle_radius_max);
            let x = rng.random_range(arena.x_min + r..arena.x_max - r);
            let y = rng.random_range(arena.y_min + r..arena.y_max - r);
            let clear_robot = (x - rx).hypot(y - ry) >= r + cfg.robot_radius + cfg.robot_clearance;
            let clear_goal = (x - goal.0).hypot(y - goal.1) >= r + cfg.robot_radius + cfg.spawn_clearance;
            let clear_others = obstacles
                .iter()
                .all(|o| (x - o.pose.x).hypot(y - o.pose.y) >= r + o.radius + cfg.spawn_clearance);
            if !(clear_robot && clear_goal && clear_others) {
                continue;
            }
            let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let commanded = match kind {
                ObstacleKind::Static => Velocity::zero(),
                ObstacleKind::Dynamic => Velocity::new(
                    rng.random_range(cfg.dynamic_v_min..=cfg.dynamic_v_max),
                    rng.random_range(-cfg.dynamic_w_max..=cfg.dynamic_w_max),
                ),
            };
            break ObstacleBody {
                pose: Pose::new(x, y, theta),
                radius: r,
                commanded,
                kind,
            };
        };
        obstacles.push(body);
    }

    Ok(World {
        robot: RobotState {
            pose: Pose::new(rx, ry, heading),
            vel: Velocity::zero(),
            radius: cfg.robot_radius,
        },
        goal,
        obstacles,
        arena,
        step_count: 0,
        seed: rng.random(),
    })
}

/// Deterministic sub-seed for a tuple of identifiers.
pub fn derive_seed(parts: &[u64]) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.to_le_bytes());
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}
