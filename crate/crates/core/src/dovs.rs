//! Dynamic Object Velocity Space.
//!
//! The robot is reduced to a point and every obstacle disc is enlarged by the
//! robot radius. A candidate velocity is unsafe when following it for the
//! time horizon brings the point inside an obstacle disc that moves along its
//! own constant-(v, w) arc. The 20x20 rasterization of that classification,
//! together with eight scalars describing the robot and its closest obstacle,
//! forms the 408-element agent state.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{admissible, propagate_unicycle, KinodynamicLimits, Pose, Velocity};
use crate::scalar::{wrap_angle, Scalar};

pub const GRID_SIZE: usize = 20;
pub const GRID_CELLS: usize = GRID_SIZE * GRID_SIZE;
pub const SITUATION_LEN: usize = 8;
pub const STATE_LEN: usize = GRID_CELLS + SITUATION_LEN;

pub const FREE: i8 = 1;
pub const UNSAFE: i8 = -1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DovsError {
    #[error("grid index ({0}, {1}) out of range")]
    IndexOutOfRange(usize, usize),
    #[error("malformed grid: {0}")]
    Malformed(String),
}

/// Sampling parameters of the collision test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DovsParams<T> {
    /// Look-ahead, seconds.
    pub horizon: T,
    /// Sampling period along the trajectories, seconds.
    pub fine_dt: T,
    /// Distance normalization of the situation scalars, meters.
    pub d_norm: T,
}

impl<T: Scalar> Default for DovsParams<T> {
    fn default() -> Self {
        Self {
            horizon: T::lit(3.0),
            fine_dt: T::lit(0.02),
            d_norm: T::lit(11.4),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    World,
    Robot,
}

/// Tracked obstacle as seen by the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleEstimate<T> {
    pub x: T,
    pub y: T,
    /// Enlarged by the robot radius.
    pub radius: T,
    pub heading: T,
    pub v: T,
    pub w: T,
    pub visible: bool,
    pub frame: Frame,
}

impl<T: Scalar> ObstacleEstimate<T> {
    /// Pose of the obstacle in the world frame, given the robot pose.
    pub fn world_pose(&self, robot: &Pose<T>) -> Pose<T> {
        match self.frame {
            Frame::World => Pose::new(self.x, self.y, self.heading),
            Frame::Robot => {
                let (x, y) = robot.to_world(self.x, self.y);
                Pose::new(x, y, self.heading + robot.theta)
            }
        }
    }

    pub fn velocity(&self) -> Velocity<T> {
        Velocity::new(self.v, self.w)
    }
}

fn sample_count<T: Scalar>(horizon: T, fine_dt: T) -> usize {
    (horizon / fine_dt + T::lit(1e-9)).floor().to_usize().unwrap_or(0)
}

fn pose_at<T: Scalar>(start: Pose<T>, cmd: Velocity<T>, t: T) -> Pose<T> {
    if t > T::zero() {
        propagate_unicycle(start, cmd, t)
    } else {
        start
    }
}

/// First sample time at which the robot point is inside the obstacle disc,
/// following `cand` from `robot`, or `None` within the horizon.
pub fn velocity_unsafe<T: Scalar>(
    cand: Velocity<T>,
    robot: Pose<T>,
    obs: &ObstacleEstimate<T>,
    horizon: T,
    fine_dt: T,
) -> Option<T> {
    debug_assert!(horizon > T::zero() && fine_dt > T::zero());
    let obs_start = obs.world_pose(&robot);
    let obs_cmd = obs.velocity();
    let r2 = obs.radius * obs.radius;
    (0..=sample_count(horizon, fine_dt)).find_map(|k| {
        let t = T::of_usize(k) * fine_dt;
        let p = pose_at(robot, cand, t);
        let o = pose_at(obs_start, obs_cmd, t);
        let (dx, dy) = (p.x - o.x, p.y - o.y);
        (dx * dx + dy * dy < r2).then_some(t)
    })
}

/// Center velocity of cell (i, j). Row 0 is the highest v, column 0 the most
/// negative w.
pub fn cell_to_velocity<T: Scalar>(
    i: usize,
    j: usize,
    lim: &KinodynamicLimits<T>,
) -> Result<Velocity<T>, DovsError> {
    if i >= GRID_SIZE || j >= GRID_SIZE {
        return Err(DovsError::IndexOutOfRange(i, j));
    }
    let n = T::of_usize(GRID_SIZE);
    let v = lim.v_max * (T::one() - (T::of_usize(i) + T::lit(0.5)) / n);
    // (2j + 1 - n) / n keeps mirrored columns exact negatives of each other.
    let k = T::of_usize(2 * j + 1) - n;
    let w = lim.w_max * k / n;
    Ok(Velocity::new(v, w))
}

/// Bin of a velocity, clamped to the grid.
pub fn velocity_to_cell<T: Scalar>(vel: Velocity<T>, lim: &KinodynamicLimits<T>) -> (usize, usize) {
    let n = T::of_usize(GRID_SIZE);
    let clamp = |x: T| -> usize {
        let f = x.floor();
        if f.is_nan() || f < T::zero() {
            0
        } else {
            f.to_usize().unwrap_or(GRID_SIZE - 1).min(GRID_SIZE - 1)
        }
    };
    let i = clamp((T::one() - vel.v / lim.v_max) * n);
    let j = clamp((vel.w + lim.w_max) / (lim.w_max + lim.w_max) * n);
    (i, j)
}

/// The rasterized DOVS: +1 free, -1 unsafe or inadmissible.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VelocityGrid {
    cells: Vec<i8>,
}

impl Default for VelocityGrid {
    fn default() -> Self {
        Self {
            cells: vec![FREE; GRID_CELLS],
        }
    }
}

impl VelocityGrid {
    pub fn from_cells(cells: Vec<i8>) -> Result<Self, DovsError> {
        if cells.len() != GRID_CELLS {
            return Err(DovsError::Malformed(format!("expected {GRID_CELLS} cells, got {}", cells.len())));
        }
        if cells.iter().any(|&c| c != FREE && c != UNSAFE) {
            return Err(DovsError::Malformed("cells must be +1 or -1".into()));
        }
        Ok(Self { cells })
    }

    /// Row-major cells.
    pub fn cells(&self) -> &[i8] {
        &self.cells
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.cells[i * GRID_SIZE + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: i8) {
        debug_assert!(value == FREE || value == UNSAFE);
        self.cells[i * GRID_SIZE + j] = value;
    }

    pub fn is_free(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == FREE
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == FREE).count()
    }

    /// Left-right mirror (w -> -w).
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for i in 0..GRID_SIZE {
            for j in 0..GRID_SIZE {
                out.set(i, j, self.get(i, GRID_SIZE - 1 - j));
            }
        }
        out
    }

    /// 20 lines of 20 comma-separated +/-1 values, highest v first.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(GRID_CELLS * 3);
        for row in self.cells.chunks(GRID_SIZE) {
            let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, DovsError> {
        let mut cells = Vec::with_capacity(GRID_CELLS);
        for (n, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let row: Result<Vec<i8>, _> = line.split(',').map(|c| c.trim().parse::<i8>()).collect();
            let row = row.map_err(|e| DovsError::Malformed(format!("line {}: {e}", n + 1)))?;
            if row.len() != GRID_SIZE {
                return Err(DovsError::Malformed(format!("line {} has {} values", n + 1, row.len())));
            }
            cells.extend(row);
        }
        Self::from_cells(cells)
    }

    /// Binary graymap (P5), free cells white, each cell `scale` pixels wide.
    pub fn to_pgm(&self, scale: usize) -> Vec<u8> {
        let scale = scale.max(1);
        let side = GRID_SIZE * scale;
        let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
        for i in 0..GRID_SIZE {
            for _ in 0..scale {
                for j in 0..GRID_SIZE {
                    let px = if self.is_free(i, j) { 255u8 } else { 0u8 };
                    out.extend(std::iter::repeat_n(px, scale));
                }
            }
        }
        out
    }
}

/// Classify every cell center. Invisible obstacles are ignored.
pub fn build_velocity_grid<T: Scalar>(
    robot: Pose<T>,
    obstacles: &[ObstacleEstimate<T>],
    lim: &KinodynamicLimits<T>,
    params: &DovsParams<T>,
) -> VelocityGrid {
    let samples = sample_count(params.horizon, params.fine_dt);
    // Obstacle trajectories do not depend on the candidate velocity.
    let tracks: Vec<(T, Vec<(T, T)>)> = obstacles
        .iter()
        .filter(|o| o.visible)
        .map(|o| {
            let start = o.world_pose(&robot);
            let cmd = o.velocity();
            let track = (0..=samples)
                .map(|k| pose_at(start, cmd, T::of_usize(k) * params.fine_dt).position())
                .collect();
            (o.radius * o.radius, track)
        })
        .collect();

    let mut grid = VelocityGrid::default();
    for i in 0..GRID_SIZE {
        for j in 0..GRID_SIZE {
            let cand = cell_to_velocity(i, j, lim).expect("in range");
            let unsafe_cell = !admissible(cand, lim)
                || (0..=samples).any(|k| {
                    let p = pose_at(robot, cand, T::of_usize(k) * params.fine_dt);
                    tracks.iter().any(|(r2, track)| {
                        let (ox, oy) = track[k];
                        let (dx, dy) = (p.x - ox, p.y - oy);
                        dx * dx + dy * dy < *r2
                    })
                });
            if unsafe_cell {
                grid.set(i, j, UNSAFE);
            }
        }
    }
    grid
}

/// Robot and closest-obstacle descriptors, each normalized to [-1, 1].
///
/// Layout: goal distance, goal bearing, v, w, closest obstacle boundary
/// distance, its bearing, its speed and its heading relative to the robot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotSituation<T> {
    pub values: [T; SITUATION_LEN],
}

impl<T: Scalar> RobotSituation<T> {
    pub fn observe(
        robot: Pose<T>,
        vel: Velocity<T>,
        goal: (T, T),
        obstacles: &[ObstacleEstimate<T>],
        lim: &KinodynamicLimits<T>,
        d_norm: T,
    ) -> Self {
        let unit = |x: T| x.max(-T::one()).min(T::one());
        let pi = T::PI();
        let (gx, gy) = robot.to_local(goal.0, goal.1);
        let d_goal = gx.hypot(gy);

        let closest = obstacles
            .iter()
            .filter(|o| o.visible)
            .map(|o| {
                let pose = o.world_pose(&robot);
                (robot.distance_to(pose.x, pose.y) - o.radius, pose, o)
            })
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

        let (d_obs, bearing, speed, rel_heading) = match closest {
            None => (T::one(), T::zero(), T::zero(), T::zero()),
            Some((d, pose, o)) => {
                let (lx, ly) = robot.to_local(pose.x, pose.y);
                (
                    unit(d / d_norm),
                    unit(ly.atan2(lx) / pi),
                    unit(o.v.abs() / lim.v_max),
                    unit(wrap_angle(pose.theta - robot.theta) / pi),
                )
            }
        };
        Self {
            values: [
                unit(d_goal / d_norm),
                unit(gy.atan2(gx) / pi),
                unit(vel.v / lim.v_max),
                unit(vel.w / lim.w_max),
                d_obs,
                bearing,
                speed,
                rel_heading,
            ],
        }
    }
}

/// The agent's state: the grid (row-major, 400 entries) followed by the
/// eight situation scalars. Stored compactly; expand with [`Self::to_vec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector<T> {
    pub grid: VelocityGrid,
    pub situation: RobotSituation<T>,
}

impl<T: Scalar> StateVector<T> {
    pub fn len(&self) -> usize {
        STATE_LEN
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, idx: usize) -> T {
        if idx < GRID_CELLS {
            T::from_i8(self.grid.cells()[idx]).unwrap()
        } else {
            self.situation.values[idx - GRID_CELLS]
        }
    }

    pub fn to_vec(&self) -> Vec<T> {
        (0..STATE_LEN).map(|k| self.get(k)).collect()
    }

    /// Grid channel as scalars, 20x20 row-major.
    pub fn grid_values(&self) -> impl Iterator<Item = T> + '_ {
        self.grid.cells().iter().map(|&c| T::from_i8(c).unwrap())
    }
}

pub fn build_state_vector<T: Scalar>(grid: VelocityGrid, sit: RobotSituation<T>) -> StateVector<T> {
    StateVector { grid, situation: sit }
}
