use rand::Rng;

use dovs_core::actions::{ActionMask, ActionSlot, NUM_ACTIONS};
use dovs_core::agent::masked_argmax;
use dovs_core::dovs::{velocity_to_cell, velocity_unsafe};
use dovs_core::kinematics::propagate_unicycle;
use dovs_core::scalar::wrap_angle;
use dovs_core::sim::{Observation, SimConfig};
use dovs_core::{Pose, QNetwork, Velocity};

/// Slot preference used to break heuristic ties.
fn preference(goal_left: bool) -> [usize; NUM_ACTIONS] {
    let (toward, away) = if goal_left {
        (ActionSlot::IncreaseW, ActionSlot::DecreaseW)
    } else {
        (ActionSlot::DecreaseW, ActionSlot::IncreaseW)
    };
    [
        ActionSlot::GoalLineFast.index(),
        ActionSlot::HeadGoal.index(),
        ActionSlot::GoalLineSlow.index(),
        toward.index(),
        ActionSlot::IncreaseV.index(),
        away.index(),
        ActionSlot::Keep.index(),
        ActionSlot::DecreaseV.index(),
    ]
}

/// Speed from which the robot can still slow below the success threshold
/// by the time it covers `d`.
fn speed_allowance(d: f64, cfg: &SimConfig) -> f64 {
    let r = &cfg.reward;
    (2.0 * cfg.limits.a_v_max * (d - r.goal_distance_threshold).max(0.0)).sqrt() + 0.9 * r.goal_speed_threshold
}

/// Rough time to reach the goal after one period at `cmd`: drive time at
/// top speed plus turn time, with a large penalty when arriving too fast.
fn time_to_goal(robot: Pose, cmd: Velocity, goal: (f64, f64), cfg: &SimConfig) -> f64 {
    let lim = &cfg.limits;
    let next = propagate_unicycle(robot, cmd, lim.dt);
    let d = next.distance_to(goal.0, goal.1);
    let heading_err = wrap_angle((goal.1 - next.y).atan2(goal.0 - next.x) - next.theta).abs();
    let overspeed = (cmd.v - speed_allowance(d, cfg)).max(0.0);
    lim.dt + d / lim.v_max + heading_err / lim.w_max + 100.0 * overspeed
}

/// Deterministic rule-based planner over the same action set: the fastest
/// action toward the goal among those whose grid cell is free, else the one
/// whose first predicted collision is latest.
pub fn baseline_goal_greedy(obs: &Observation, robot: Pose, goal: (f64, f64), cfg: &SimConfig) -> usize {
    let (_, gy) = robot.to_local(goal.0, goal.1);
    let order = preference(gy >= 0.0);
    let table = &obs.actions;
    let valid: Vec<usize> = order.iter().copied().filter(|&a| table.mask.is_valid(a)).collect();
    let safe: Vec<usize> = valid
        .iter()
        .copied()
        .filter(|&a| {
            let (i, j) = velocity_to_cell(table.commands[a], &cfg.limits);
            obs.state.grid.is_free(i, j)
        })
        .collect();
    if !safe.is_empty() {
        let mut best = safe[0];
        let mut best_t = time_to_goal(robot, table.commands[best], goal, cfg);
        for &a in &safe[1..] {
            let t = time_to_goal(robot, table.commands[a], goal, cfg);
            if t < best_t - 1e-12 {
                best = a;
                best_t = t;
            }
        }
        return best;
    }
    let horizon = cfg.dovs.horizon;
    let ttc = |a: usize| {
        obs.estimates
            .iter()
            .filter(|o| o.visible)
            .filter_map(|o| velocity_unsafe(table.commands[a], robot, o, horizon, cfg.dovs.fine_dt))
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = valid[0];
    let mut best_t = ttc(best);
    for &a in &valid[1..] {
        let t = ttc(a);
        if t > best_t {
            best = a;
            best_t = t;
        }
    }
    best
}

/// Uniform over valid actions.
pub fn baseline_random<R: Rng + ?Sized>(mask: &ActionMask, rng: &mut R) -> usize {
    let valid: Vec<usize> = mask.valid_indices().collect();
    valid[rng.random_range(0..valid.len())]
}

/// Greedy choice of a trained network.
pub fn dqn_action(net: &QNetwork, obs: &Observation) -> usize {
    let q = net.q_values(&obs.state);
    masked_argmax(&q, &obs.actions.mask).expect("action set always has a valid slot")
}
