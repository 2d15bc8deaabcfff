use serde::{Deserialize, Serialize};

use crate::sim::world::{EpisodeStatus, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    pub r_goal: f64,
    pub r_collision: f64,
    pub r_dist: f64,
    /// Success requires the goal closer than this, meters.
    pub goal_distance_threshold: f64,
    /// ... and linear speed below this, m/s.
    pub goal_speed_threshold: f64,
    pub safe_distance: f64,
    pub safe_coefficient: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            r_goal: 15.0,
            r_collision: -15.0,
            r_dist: 2.5,
            goal_distance_threshold: 0.15,
            goal_speed_threshold: 0.2,
            safe_distance: 0.2,
            safe_coefficient: 0.1,
        }
    }
}

/// Proximity penalty for a boundary distance `d_obs` to the closest obstacle.
pub fn safedist_term(d_obs: f64, p: &RewardParams) -> f64 {
    if d_obs < p.safe_distance {
        -p.safe_coefficient * (p.safe_distance - d_obs).abs()
    } else {
        0.0
    }
}

/// Reward of the transition `prev -> new`. Timeouts use the shaping branch.
pub fn reward(prev: &World, new: &World, status: EpisodeStatus, p: &RewardParams) -> f64 {
    match status {
        EpisodeStatus::Success => p.r_goal,
        EpisodeStatus::Collision => p.r_collision,
        EpisodeStatus::Running | EpisodeStatus::Timeout => {
            shaping_reward(new.goal_distance() - prev.goal_distance(), new.obstacle_distance(), p)
        }
    }
}

/// Non-terminal branch from the goal-distance increment and obstacle distance.
pub fn shaping_reward(delta_goal: f64, d_obs: f64, p: &RewardParams) -> f64 {
    -p.r_dist * delta_goal + safedist_term(d_obs.max(0.0), p)
}
