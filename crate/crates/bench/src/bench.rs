use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dovs_core::config::{BenchmarkConfig, Config, PlannerId};
use dovs_core::nn::load_weights;
use dovs_core::sim::{derive_seed, EpisodeStatus, Env, ObstacleMix, ScenarioSpec, SimConfig, Trace, World};
use dovs_core::QNetwork;

use crate::planner::{baseline_goal_greedy, baseline_random, dqn_action};
use crate::BenchError;

#[derive(Debug, Clone)]
pub enum Planner {
    Dqn(Box<QNetwork>),
    GoalGreedy,
    Random,
}

impl Planner {
    pub fn id(&self) -> PlannerId {
        match self {
            Planner::Dqn(_) => PlannerId::DqnDovs,
            Planner::GoalGreedy => PlannerId::GoalGreedy,
            Planner::Random => PlannerId::Random,
        }
    }

    /// Build a planner; the learned one loads `cfg.benchmark.checkpoint`.
    pub fn load(id: PlannerId, cfg: &Config) -> Result<Self, BenchError> {
        Ok(match id {
            PlannerId::DqnDovs => {
                let path = cfg
                    .benchmark
                    .checkpoint
                    .as_ref()
                    .ok_or_else(|| BenchError::Usage("the dqn-dovs planner needs a checkpoint".into()))?;
                let (net, _) = load_weights::<f64, _>(path, &cfg.agent.arch)?;
                Planner::Dqn(Box::new(net))
            }
            PlannerId::GoalGreedy => Planner::GoalGreedy,
            PlannerId::Random => Planner::Random,
        })
    }
}

/// Outcome of one evaluation episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub obstacles: usize,
    pub episode: usize,
    pub seed: u64,
    pub world_hash: String,
    pub status: EpisodeStatus,
    pub steps: u32,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub obstacles: usize,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub timeout_rate: f64,
    /// Mean time to goal over successful episodes.
    pub mean_time_s: Option<f64>,
    /// Summed solve time over summed reference solve time, on the episodes
    /// both planners solved.
    pub time_rate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub planner: PlannerId,
    pub episodes: Vec<EpisodeResult>,
}

pub fn scenario_seed(base: u64, count: usize, episode: usize) -> u64 {
    derive_seed(&[base, count as u64, episode as u64])
}

pub fn benchmark_spec(count: usize, dynamic_fraction: f64) -> ScenarioSpec {
    let mix = if dynamic_fraction >= 1.0 {
        ObstacleMix::Dynamic
    } else if dynamic_fraction <= 0.0 {
        ObstacleMix::Static
    } else {
        ObstacleMix::Mixed { dynamic_fraction }
    };
    ScenarioSpec::with_obstacles(count, mix)
}

pub fn world_hash(world: &World) -> String {
    let bytes = serde_json::to_vec(world).expect("world serializes");
    Sha256::digest(&bytes)[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Run one episode to its end, optionally recording a trace.
pub fn run_episode(
    planner: &Planner,
    spec: &ScenarioSpec,
    seed: u64,
    sim: &SimConfig,
    record: bool,
) -> Result<(EpisodeStatus, u32, World, Option<Trace>), BenchError> {
    let mut env = Env::spawn(spec, seed, sim.clone())?;
    let start = env.world().clone();
    let mut trace = record.then(|| Trace::new(start.clone(), sim.clone()));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0x5eed]));
    while !env.status().is_terminal() {
        let obs = env.observe();
        let action = match planner {
            Planner::Dqn(net) => dqn_action(net, &obs),
            Planner::GoalGreedy => baseline_goal_greedy(&obs, env.world().robot.pose, env.world().goal, sim),
            Planner::Random => baseline_random(&obs.actions.mask, &mut rng),
        };
        let cmd = obs.actions.commands[action];
        let out = env.step(cmd)?;
        if let Some(t) = trace.as_mut() {
            t.push(env.world(), Some(action), cmd, out.reward, out.status);
        }
    }
    Ok((env.status(), env.world().step_count, start, trace))
}

/// Every (count, episode) pair of the configuration, with the same worlds
/// for every planner.
pub fn run_benchmark(cfg: &BenchmarkConfig, sim: &SimConfig, planner: &Planner) -> Result<BenchmarkRun, BenchError> {
    run_benchmark_with(cfg, sim, planner, |_| {})
}

pub fn run_benchmark_with(
    cfg: &BenchmarkConfig,
    sim: &SimConfig,
    planner: &Planner,
    mut on_episode: impl FnMut(&EpisodeResult),
) -> Result<BenchmarkRun, BenchError> {
    cfg.validate()?;
    let mut episodes = Vec::with_capacity(cfg.obstacle_counts.len() * cfg.episodes);
    for &count in &cfg.obstacle_counts {
        let spec = benchmark_spec(count, cfg.dynamic_fraction);
        for episode in 0..cfg.episodes {
            let seed = scenario_seed(cfg.seed, count, episode);
            let (status, steps, world, _) = run_episode(planner, &spec, seed, sim, false)?;
            let r = EpisodeResult {
                obstacles: count,
                episode,
                seed,
                world_hash: world_hash(&world),
                status,
                steps,
                time_s: steps as f64 * sim.limits.dt,
            };
            on_episode(&r);
            episodes.push(r);
        }
    }
    Ok(BenchmarkRun {
        planner: planner.id(),
        episodes,
    })
}

/// Per obstacle count rates, in the order counts first appear.
pub fn aggregate(results: &[EpisodeResult], reference: Option<&[EpisodeResult]>) -> Vec<MetricsRow> {
    let mut counts: Vec<usize> = Vec::new();
    for r in results {
        if !counts.contains(&r.obstacles) {
            counts.push(r.obstacles);
        }
    }
    counts
        .into_iter()
        .map(|count| {
            let rows: Vec<&EpisodeResult> = results.iter().filter(|r| r.obstacles == count).collect();
            let n = rows.len() as f64;
            let rate = |s: EpisodeStatus| rows.iter().filter(|r| r.status == s).count() as f64 / n;
            let solved: Vec<&&EpisodeResult> = rows.iter().filter(|r| r.status == EpisodeStatus::Success).collect();
            let mean_time_s =
                (!solved.is_empty()).then(|| solved.iter().map(|r| r.time_s).sum::<f64>() / solved.len() as f64);
            let time_rate = reference.and_then(|reference| {
                let (mut own, mut other) = (0.0, 0.0);
                for r in &solved {
                    let twin = reference
                        .iter()
                        .find(|x| x.obstacles == count && x.episode == r.episode && x.seed == r.seed);
                    if let Some(t) = twin.filter(|t| t.status == EpisodeStatus::Success) {
                        own += r.time_s;
                        other += t.time_s;
                    }
                }
                (other > 0.0).then(|| own / other)
            });
            MetricsRow {
                obstacles: count,
                success_rate: rate(EpisodeStatus::Success),
                collision_rate: rate(EpisodeStatus::Collision),
                timeout_rate: rate(EpisodeStatus::Timeout),
                mean_time_s,
                time_rate,
            }
        })
        .collect()
}
