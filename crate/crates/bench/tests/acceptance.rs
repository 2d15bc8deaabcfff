//! End-to-end acceptance checks, one line per criterion.
//!
//! Criterion 8 trains a desk-scale curriculum and takes the bulk of the run
//! time. Set `DQN_DOVS_KEEP` to a directory to keep its checkpoints.
//! Numeric arguments select criteria, e.g. `cargo test --test acceptance -- 1 5`.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dovs_bench::bench::{aggregate, run_benchmark, Planner};
use dovs_core::actions::{enumerate_actions, ActionMask, NUM_ACTIONS};
use dovs_core::agent::{
    bootstrap_target, double_dqn_target, nstep_accumulate, run_curriculum, Agent, Hyperparams, NStepReturn,
    NStepTransition, PriorityStore, Transition,
};
use dovs_core::config::{BenchmarkConfig, Config};
use dovs_core::dovs::{
    build_state_vector, build_velocity_grid, cell_to_velocity, velocity_unsafe, DovsParams, RobotSituation,
    VelocityGrid, GRID_CELLS, GRID_SIZE,
};
use dovs_core::kinematics::{admissible, dynamic_window, goal_arc, GoalArc, KinodynamicLimits, Pose, Velocity};
use dovs_core::nn::layers::{dueling_aggregate, dueling_backward, Conv3x3, Dense};
use dovs_core::nn::{qnet_backward, ArchConfig, QNetwork};
use dovs_core::sim::{
    reward, safedist_term, sense, shaping_reward, spawn_scenario, step_world, Arena, EpisodeStatus, ObstacleBody,
    ObstacleKind, ObstacleMix, RewardParams, RobotState, ScenarioSpec, SimConfig, World,
};
use dovs_core::StateVector;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("reward exactness", reward_exactness),
        ("velocity grid vs finer oracle", grid_oracle),
        ("kinodynamic feasibility", feasibility),
        ("gradient check", gradient_check),
        ("bellman, double and n-step targets", bellman_cases),
        ("prioritized replay statistics", replay_statistics),
        ("toy MDP convergence", toy_mdp),
        ("desk-scale curriculum", desk_curriculum),
        ("determinism of train and eval", determinism),
        ("episode mechanics", episode_mechanics),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        if !selected.is_empty() && !selected.contains(&(k + 1)) {
            continue;
        }
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {:>2} {name} ({secs:.1}s): {detail}", k + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn bare_world(pose: Pose<f64>, vel: Velocity<f64>, goal: (f64, f64), obstacles: Vec<ObstacleBody>) -> World {
    World {
        robot: RobotState {
            pose,
            vel,
            radius: 0.18,
        },
        goal,
        obstacles,
        arena: Arena::default(),
        step_count: 0,
        seed: 0,
    }
}

fn disc(x: f64, y: f64, radius: f64) -> ObstacleBody {
    ObstacleBody {
        pose: Pose::new(x, y, 0.0),
        radius,
        commanded: Velocity::zero(),
        kind: ObstacleKind::Static,
    }
}

fn reward_exactness() -> Outcome {
    let p = RewardParams::default();
    let w = bare_world(Pose::new(0.0, 0.0, 0.0), Velocity::zero(), (2.0, 0.0), vec![]);
    let cases = [
        ("success", reward(&w, &w, EpisodeStatus::Success, &p), 15.0),
        ("collision", reward(&w, &w, EpisodeStatus::Collision, &p), -15.0),
        ("shaping", shaping_reward(-0.06, 0.5, &p), 0.15),
        ("safedist", safedist_term(0.1, &p), -0.01),
    ];
    let worst = cases.iter().map(|(_, got, want)| (got - want).abs()).fold(0.0, f64::max);
    let values: Vec<String> = cases.iter().map(|(n, got, _)| format!("{n}={got}")).collect();
    check(worst <= 1e-12, format!("{} (max error {worst:.1e})", values.join(" ")))
}

/// Cell-by-cell rebuild with ten times finer time sampling.
fn oracle_grid(
    robot: Pose<f64>,
    obstacles: &[dovs_core::dovs::ObstacleEstimate<f64>],
    lim: &KinodynamicLimits<f64>,
    p: &DovsParams<f64>,
) -> Vec<i8> {
    let mut cells = Vec::with_capacity(GRID_CELLS);
    for i in 0..GRID_SIZE {
        for j in 0..GRID_SIZE {
            let v = cell_to_velocity(i, j, lim).unwrap();
            let blocked = !admissible(v, lim)
                || obstacles
                    .iter()
                    .filter(|o| o.visible)
                    .any(|o| velocity_unsafe(v, robot, o, p.horizon, p.fine_dt / 10.0).is_some());
            cells.push(if blocked { -1 } else { 1 });
        }
    }
    cells
}

fn grid_oracle() -> Outcome {
    let sim = SimConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 1.0f64;
    let mut total_agree = 0usize;
    for seed in 0..100u64 {
        let n = 1 + (seed as usize % 12);
        let spec = ScenarioSpec::with_obstacles(n, ObstacleMix::Mixed { dynamic_fraction: 0.85 });
        let world = spawn_scenario(&spec, 1000 + seed, &sim).map_err(|e| e.to_string())?;
        let estimates = sense(&world, &sim.sensor, &mut rng);
        let pose = world.robot.pose;
        let grid = build_velocity_grid(pose, &estimates, &sim.limits, &sim.dovs);
        let oracle = oracle_grid(pose, &estimates, &sim.limits, &sim.dovs);
        let agree = grid.cells().iter().zip(&oracle).filter(|(a, b)| a == b).count();
        total_agree += agree;
        worst = worst.min(agree as f64 / GRID_CELLS as f64);
    }
    let mean = total_agree as f64 / (100 * GRID_CELLS) as f64;
    check(
        worst >= 0.99,
        format!("worst scenario agreement {worst:.4}, mean {mean:.4} over 100 scenarios"),
    )
}

fn feasibility() -> Outcome {
    let lim = KinodynamicLimits::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0usize;
    let mut checked = 0usize;
    for _ in 0..100_000 {
        let cur = loop {
            let v = Velocity::new(rng.random_range(0.0..=lim.v_max), rng.random_range(-lim.w_max..=lim.w_max));
            if admissible(v, &lim) {
                break v;
            }
        };
        let (gx, gy) = (rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
        let arc = goal_arc(gx, gy).unwrap_or(GoalArc::Straight);
        let dw = dynamic_window(cur, &lim);
        let table = enumerate_actions(&dw, &arc, &lim);
        for a in table.mask.valid_indices() {
            checked += 1;
            let cmd = table.commands[a];
            if !admissible(cmd, &lim) || !lim.within_envelope(cur, cmd, 1e-9) {
                violations += 1;
            }
        }
    }
    check(violations == 0, format!("{violations} violations over {checked} selectable actions"))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Central differences on `f` against `grad` at every index of `x`.
fn fd_error(x: &mut [f64], grad: &[f64], f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..x.len() {
        let orig = x[k];
        x[k] = orig + h;
        let up = f(x);
        x[k] = orig - h;
        let down = f(x);
        x[k] = orig;
        worst = worst.max(rel_err(grad[k], (up - down) / (2.0 * h)));
    }
    worst
}

fn dense_error(rng: &mut ChaCha8Rng) -> f64 {
    let (layer, batch) = (Dense::new(9, 6), 3);
    let mut w = uniform(rng, layer.weight_len());
    let mut b = uniform(rng, 6);
    let mut x = uniform(rng, 9 * batch);
    let c = uniform(rng, 6 * batch);
    let loss = |w: &[f64], b: &[f64], x: &[f64]| {
        let mut y = vec![0.0; 6 * batch];
        layer.forward(w, b, x, batch, &mut y);
        y.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>()
    };
    let (mut dw, mut db, mut dx) = (vec![0.0; w.len()], vec![0.0; 6], vec![0.0; x.len()]);
    layer.backward(&w, &x, &c, batch, &mut dw, &mut db, Some(&mut dx));
    let (w0, b0, x0) = (w.clone(), b.clone(), x.clone());
    fd_error(&mut w, &dw, &|w| loss(w, &b0, &x0))
        .max(fd_error(&mut b, &db, &|b| loss(&w0, b, &x0)))
        .max(fd_error(&mut x, &dx, &|x| loss(&w0, &b0, x)))
}

fn conv_error(rng: &mut ChaCha8Rng, layer: Conv3x3) -> f64 {
    let batch = 2;
    let mut w = uniform(rng, layer.weight_len());
    let mut b = uniform(rng, layer.out_c);
    let mut x = uniform(rng, layer.input_len() * batch);
    let c = uniform(rng, layer.output_len() * batch);
    let loss = |w: &[f64], b: &[f64], x: &[f64]| {
        let mut cols = vec![0.0; layer.cols_len() * batch];
        let mut y = vec![0.0; layer.output_len() * batch];
        layer.forward(w, b, x, batch, &mut cols, &mut y);
        y.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>()
    };
    let mut cols = vec![0.0; layer.cols_len() * batch];
    let mut y = vec![0.0; layer.output_len() * batch];
    layer.forward(&w, &b, &x, batch, &mut cols, &mut y);
    let (mut dw, mut db, mut dx) = (vec![0.0; w.len()], vec![0.0; b.len()], vec![0.0; x.len()]);
    layer.backward(&w, &cols, &c, batch, &mut dw, &mut db, Some(&mut dx));
    let (w0, b0, x0) = (w.clone(), b.clone(), x.clone());
    fd_error(&mut w, &dw, &|w| loss(w, &b0, &x0))
        .max(fd_error(&mut b, &db, &|b| loss(&w0, b, &x0)))
        .max(fd_error(&mut x, &dx, &|x| loss(&w0, &b0, x)))
}

fn dueling_error(rng: &mut ChaCha8Rng) -> f64 {
    let c = uniform(rng, NUM_ACTIONS);
    let mut va = uniform(rng, 1 + NUM_ACTIONS);
    let (dv, da) = dueling_backward(&c);
    let grad: Vec<f64> = std::iter::once(dv).chain(da).collect();
    fd_error(&mut va, &grad, &|va| {
        dueling_aggregate(va[0], &va[1..]).iter().zip(&c).map(|(q, c)| q * c).sum()
    })
}

/// Probes `per_tensor` random entries of every parameter tensor.
fn network_error(rng: &mut ChaCha8Rng, per_tensor: usize) -> (f64, usize) {
    let mut net = QNetwork::new(ArchConfig::default(), rng);
    let specs = net.param_specs().to_vec();
    // Nonzero biases keep units away from the rectifier kink.
    for s in specs.iter().filter(|s| s.name.ends_with(".bias")) {
        for p in &mut net.params_mut()[s.offset..s.offset + s.len()] {
            *p = rng.random_range(-0.1..0.1);
        }
    }
    let batch = 2;
    let input: Vec<f64> = (0..batch)
        .flat_map(|_| {
            let mut s: Vec<f64> = (0..GRID_CELLS).map(|_| if rng.random_bool(0.7) { 1.0 } else { -1.0 }).collect();
            s.extend(uniform(rng, 8));
            s
        })
        .collect();
    let c = uniform(rng, NUM_ACTIONS * batch);
    let loss = |net: &QNetwork<f64>| {
        let cache = net.forward_batch(&input, batch).unwrap();
        cache.q.iter().zip(&c).map(|(q, c)| q * c).sum::<f64>()
    };
    let cache = net.forward_batch(&input, batch).unwrap();
    let grads = qnet_backward(&net, &cache, &c).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut probes = 0;
    for s in &specs {
        for _ in 0..per_tensor {
            let k = s.offset + rng.random_range(0..s.len());
            let orig = net.params()[k];
            net.params_mut()[k] = orig + h;
            let up = loss(&net);
            net.params_mut()[k] = orig - h;
            let down = loss(&net);
            net.params_mut()[k] = orig;
            worst = worst.max(rel_err(grads[k], (up - down) / (2.0 * h)));
            probes += 1;
        }
    }
    (worst, probes)
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dense = dense_error(&mut rng);
    let conv1 = conv_error(&mut rng, Conv3x3::new(1, 3, 6, 6, 1));
    let conv2 = conv_error(&mut rng, Conv3x3::new(3, 4, 6, 6, 2));
    let dueling = dueling_error(&mut rng);
    let (net, probes) = network_error(&mut rng, 12);
    let worst = [dense, conv1, conv2, dueling, net].into_iter().fold(0.0, f64::max);
    check(
        worst < 1e-4,
        format!(
            "max relative error dense {dense:.1e}, conv {:.1e}, dueling {dueling:.1e}, network {net:.1e} ({probes} probes)",
            conv1.max(conv2)
        ),
    )
}

fn dummy_state(tag: f64) -> StateVector {
    let mut values = [0.0; 8];
    values[0] = tag;
    build_state_vector(VelocityGrid::default(), RobotSituation { values })
}

/// Network whose output is `q` for every input.
fn constant_net(q: [f64; NUM_ACTIONS]) -> QNetwork<f64> {
    let mut net = QNetwork::zeros(ArchConfig::default());
    let specs = net.param_specs().to_vec();
    let mean = q.iter().sum::<f64>() / NUM_ACTIONS as f64;
    let v = specs.iter().find(|s| s.name == "value2.bias").unwrap();
    net.params_mut()[v.offset] = mean;
    let a = specs.iter().find(|s| s.name == "advantage2.bias").unwrap();
    for (k, qk) in q.iter().enumerate() {
        net.params_mut()[a.offset + k] = qk - mean;
    }
    net
}

fn bellman_cases() -> Outcome {
    let gamma = 0.97;
    let step = |from: f64, to: f64| Transition {
        state: dummy_state(from),
        action: 0,
        reward: 1.0,
        next_state: dummy_state(to),
        terminal: false,
        next_mask: ActionMask::all(),
    };
    let ret = nstep_accumulate(&[step(0.0, 0.1), step(0.1, 0.2)], gamma, 2).map_err(|e| e.to_string())?;
    let online = constant_net([0.0, 1.0, 2.0, 5.0, 1.0, 0.0, 0.0, 0.0]);
    let target = constant_net([0.0, 0.0, 0.0, 10.0, 20.0, 0.0, 0.0, 0.0]);
    let y = double_dqn_target(&ret, &online, &target, gamma);

    let q_online = [5.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let q_target = [100.0, 3.0, 7.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let masked = NStepReturn {
        ret: 0.5,
        tail_state: dummy_state(0.0),
        tail_mask: ActionMask([false, true, true, false, false, false, false, false]),
        terminal: false,
        k: 1,
    };
    let y_masked = bootstrap_target(&masked, &q_online, &q_target, gamma);
    let ok = (y - 11.379).abs() < 1e-9 && (y_masked - (0.5 + gamma * 3.0)).abs() < 1e-9;
    check(ok, format!("y = {y:.9}, masked y = {y_masked:.9} (expected 11.379 and 3.41)"))
}

fn terminal_item(tag: f64) -> NStepTransition {
    NStepTransition {
        state: dummy_state(tag),
        action: 0,
        ret: NStepReturn {
            ret: 0.0,
            tail_state: dummy_state(tag),
            tail_mask: ActionMask::all(),
            terminal: true,
            k: 1,
        },
    }
}

fn replay_statistics() -> Outcome {
    let mut store = PriorityStore::new(8, 1.0, 0.0);
    store.insert_with_priority(terminal_item(0.0), 1.0);
    store.insert_with_priority(terminal_item(1.0), 3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut hits = [0usize; 2];
    for _ in 0..10_000 {
        hits[store.sample(1, 0.4, &mut rng).map_err(|e| e.to_string())?.indices[0]] += 1;
    }
    let f = [hits[0] as f64 / 1e4, hits[1] as f64 / 1e4];

    let mut store = PriorityStore::new(1000, 0.6, 0.01);
    for _ in 0..100_000 {
        if store.is_empty() || rng.random_bool(0.3) {
            store.insert(terminal_item(0.0));
        } else {
            let i = rng.random_range(0..store.len());
            store.update(&[i], &[rng.random_range(-20.0..20.0)]);
        }
    }
    let leaves: f64 = (0..store.len()).map(|i| store.priority(i)).sum();
    let drift = (store.tree().total() - leaves).abs();
    let ok = (f[0] - 0.25).abs() <= 0.02 && (f[1] - 0.75).abs() <= 0.02 && drift < 1e-9;
    check(
        ok,
        format!("frequencies [{:.4}, {:.4}], root minus leaf sum {drift:.1e}", f[0], f[1]),
    )
}

/// Two states, two actions, deterministic:
/// A: a0 gives +1 and moves to B, a1 gives 0 and ends.
/// B: a0 gives +2 and ends, a1 gives -1 and moves to A.
fn toy_mdp() -> Outcome {
    let gamma = 0.97;
    let hp = Hyperparams {
        n_step: 1,
        batch_size: 16,
        warmup: 1,
        replay_capacity: 1000,
        lr_start: 1e-3,
        lr_end: 1e-3,
        target_sync_period: 20,
        train_every: 1,
        arch: ArchConfig {
            conv1_filters: 2,
            conv2_filters: 2,
            situation_units: 16,
            trunk_units: 32,
            head_units: 16,
        },
        ..Hyperparams::default()
    };
    let (a, b) = (dummy_state(-0.5), dummy_state(0.5));
    let mask = ActionMask([true, true, false, false, false, false, false, false]);
    let mut agent = Agent::new(hp, 2000, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..400 {
        let mut at_a = true;
        for _ in 0..6 {
            let action = rng.random_range(0..2usize);
            let (r, next, terminal) = match (at_a, action) {
                (true, 0) => (1.0, Some(false), false),
                (true, _) => (0.0, None, true),
                (false, 0) => (2.0, None, true),
                (false, _) => (-1.0, Some(true), false),
            };
            let here = if at_a { a.clone() } else { b.clone() };
            let there = match next {
                Some(true) => a.clone(),
                Some(false) => b.clone(),
                None => here.clone(),
            };
            let t = Transition {
                state: here,
                action,
                reward: r,
                next_state: there,
                terminal,
                next_mask: mask,
            };
            agent.remember(t, terminal).map_err(|e| e.to_string())?;
            agent.train_step().map_err(|e| e.to_string())?;
            agent.train_step().map_err(|e| e.to_string())?;
            match next {
                Some(n) => at_a = n,
                None => break,
            }
        }
    }
    let (qa, qb) = (agent.online.q_values(&a), agent.online.q_values(&b));
    let qa0 = 1.0 + gamma * 2.0;
    let pairs = [(qa[0], qa0), (qa[1], 0.0), (qb[0], 2.0), (qb[1], -1.0 + gamma * qa0)];
    let err = pairs.iter().map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    check(err < 0.05, format!("max |Q - Q*| = {err:.4}"))
}

/// The desk-scale configuration: every stage at a tenth of its length with a
/// narrower network so training fits the time budget on one core.
pub fn desk_config() -> Config {
    let mut cfg = Config::default().scaled_curriculum(0.1);
    cfg.agent.arch = ArchConfig {
        conv1_filters: 8,
        conv2_filters: 16,
        situation_units: 32,
        trunk_units: 128,
        head_units: 64,
    };
    cfg.agent.train_every = 1;
    cfg
}

const DESK_SEED: u64 = 7;
const EVAL_SEED: u64 = 0;

fn success_at(count: usize, planner: &Planner, sim: &SimConfig) -> Result<f64, String> {
    let cfg = BenchmarkConfig {
        obstacle_counts: vec![count],
        episodes: 200,
        dynamic_fraction: 1.0,
        seed: EVAL_SEED,
        ..Default::default()
    };
    let run = run_benchmark(&cfg, sim, planner).map_err(|e| e.to_string())?;
    Ok(aggregate(&run.episodes, None)[0].success_rate)
}

fn desk_curriculum() -> Outcome {
    let cfg = desk_config();
    let keep = std::env::var_os("DQN_DOVS_KEEP").map(PathBuf::from);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = keep.unwrap_or_else(|| tmp.path().to_path_buf());
    let t = Instant::now();
    let res = run_curriculum(&cfg.sim, &cfg.agent, &cfg.curriculum, DESK_SEED, &out, None, |_| {})
        .map_err(|e| e.to_string())?;
    let train_min = t.elapsed().as_secs_f64() / 60.0;
    let dqn = Planner::Dqn(Box::new(res.agent.online.clone()));
    let empty = success_at(0, &dqn, &cfg.sim)?;
    let dqn5 = success_at(5, &dqn, &cfg.sim)?;
    let greedy5 = success_at(5, &Planner::GoalGreedy, &cfg.sim)?;
    let random5 = success_at(5, &Planner::Random, &cfg.sim)?;
    let total_min = t.elapsed().as_secs_f64() / 60.0;
    let ok = empty >= 0.90 && dqn5 > random5 && dqn5 >= greedy5 && total_min <= 60.0;
    check(
        ok,
        format!(
            "{} episodes in {train_min:.1} min; success empty {empty:.3}; 5 dynamic: dqn {dqn5:.3}, goal-greedy {greedy5:.3}, random {random5:.3}",
            res.records.len()
        ),
    )
}

fn cli(args: &[&str]) -> Result<std::process::Output, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dqn-dovs"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("dqn-dovs {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out)
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Two short trainings and two evaluations through the command line.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = desk_config().scaled_curriculum(0.05);
    cfg.agent.warmup = 200;
    let config = dir.path().join("short.json");
    std::fs::write(&config, cfg.to_json()).map_err(|e| e.to_string())?;
    let config = path_str(&config);

    let mut ckpts = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        cli(&["train", "--config", config, "--seed", "5", "--out", path_str(&out)])?;
        ckpts.push(std::fs::read(out.join("final.ckpt")).map_err(|e| e.to_string())?);
    }
    let ckpt = dir.path().join("a").join("final.ckpt");
    let mut reports = Vec::new();
    for run in ["a.csv", "b.csv"] {
        let out = dir.path().join(run);
        cli(&[
            "eval",
            "--config",
            config,
            "--checkpoint",
            path_str(&ckpt),
            "--counts",
            "1,4",
            "--episodes",
            "10",
            "--seed",
            "3",
            "--out",
            path_str(&out),
        ])?;
        reports.push(std::fs::read(out).map_err(|e| e.to_string())?);
    }
    let same_ckpt = ckpts[0] == ckpts[1];
    let same_csv = reports[0] == reports[1];
    check(
        same_ckpt && same_csv,
        format!(
            "checkpoints identical: {same_ckpt} ({} bytes), eval CSVs identical: {same_csv}",
            ckpts[0].len()
        ),
    )
}

fn episode_mechanics() -> Outcome {
    let sim = SimConfig::default();
    let status = |w: &World| w.status(&sim);
    let at = |d: f64, v: f64| bare_world(Pose::new(0.0, 0.0, 0.0), Velocity::new(v, 0.0), (d, 0.0), vec![]);
    let mut failures = Vec::new();
    let mut expect = |name: &str, got: EpisodeStatus, want: EpisodeStatus| {
        if got != want {
            failures.push(format!("{name}: {got:?} != {want:?}"));
        }
    };
    expect("d just inside, v just below", status(&at(0.15 - 1e-9, 0.2 - 1e-9)), EpisodeStatus::Success);
    expect("d at threshold", status(&at(0.15, 0.1)), EpisodeStatus::Running);
    expect("v at threshold", status(&at(0.1, 0.2)), EpisodeStatus::Running);

    let touching = 0.18 + 0.3;
    let near = |gap: f64| {
        bare_world(
            Pose::new(0.0, 0.0, 0.0),
            Velocity::zero(),
            (2.0, 2.0),
            vec![disc(touching + gap, 0.0, 0.3)],
        )
    };
    expect("discs overlap", status(&near(-1e-9)), EpisodeStatus::Collision);
    expect("discs touch", status(&near(0.0)), EpisodeStatus::Running);
    expect("discs apart", status(&near(1e-9)), EpisodeStatus::Running);

    let mut w = at(3.0, 0.0);
    w.step_count = sim.max_steps - 2;
    let first = step_world(&mut w, Velocity::zero(), &sim).map_err(|e| e.to_string())?;
    expect("step 499", first, EpisodeStatus::Running);
    let second = step_world(&mut w, Velocity::zero(), &sim).map_err(|e| e.to_string())?;
    expect("step 500", second, EpisodeStatus::Timeout);
    check(
        failures.is_empty(),
        if failures.is_empty() {
            "success, collision and timeout boundaries exact".to_string()
        } else {
            failures.join("; ")
        },
    )
}
