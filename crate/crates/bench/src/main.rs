use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dovs_bench::bench::{aggregate, benchmark_spec, run_benchmark_with, run_episode, scenario_seed, Planner};
use dovs_bench::report::{render_csv, render_json, ReportFormat};
use dovs_bench::svg::{export_trajectory_svg, DEFAULT_SCALE};
use dovs_bench::{emit_report, BenchError};
use dovs_core::agent::run_curriculum;
use dovs_core::config::{Config, PlannerId};
use dovs_core::sim::{observe, spawn_scenario, ObstacleMix, ScenarioSpec, Trace, TraceLine, World};
use dovs_core::{Pose, Velocity};

#[derive(Parser)]
#[command(name = "dqn-dovs", version, about = "Train and evaluate the DQN-DOVS motion planner")]
struct Cli {
    /// JSON configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// csv or json for reports, csv or pgm for grid dumps.
    #[arg(long, global = true)]
    format: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the curriculum and write checkpoints plus a training log.
    Train {
        /// Continue from a checkpoint.
        #[arg(long)]
        resume_from: Option<PathBuf>,
        /// Multiply every stage length, e.g. 0.1 for a desk-scale run.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Benchmark a planner over shared scenarios and report metrics.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        planner: Option<String>,
        /// Planner whose solve times anchor the time rate.
        #[arg(long)]
        reference: Option<String>,
        /// Comma separated obstacle counts.
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        dynamic_fraction: Option<f64>,
        /// Write the first episodes of every count as traces here.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        trace_episodes: usize,
    },
    /// Render a trace as an SVG plot.
    Replay {
        trace: PathBuf,
        /// Pixels per metre.
        #[arg(long, default_value_t = DEFAULT_SCALE)]
        scale: f64,
    },
    /// Build the velocity grid for a scenario and robot pose.
    DovsDump {
        /// World JSON, or a trace whose header is used. Spawned from the
        /// seed when absent.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        obstacles: usize,
        /// Override the robot pose: x,y,theta.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        pose: Option<Vec<f64>>,
        /// Override the robot velocity: v,w.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        vel: Option<Vec<f64>>,
        /// Pixels per cell in graymap output.
        #[arg(long, default_value_t = 16)]
        pixels: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                BenchError::Usage(_) | BenchError::Config(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn usage(msg: impl Into<String>) -> BenchError {
    BenchError::Usage(msg.into())
}

fn planner_id(name: &str) -> Result<PlannerId, BenchError> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| usage(format!("unknown planner {name:?}, expected dqn-dovs, goal-greedy or random")))
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), BenchError> {
    match out {
        Some(path) => fs::write(path, bytes)?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), BenchError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Train { resume_from, scale } => {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(usage("--scale must be positive"));
            }
            if scale != 1.0 {
                cfg = cfg.scaled_curriculum(scale);
            }
            let out = cli.out.unwrap_or_else(|| PathBuf::from("run"));
            let seed = cli.seed.unwrap_or(0);
            let res = run_curriculum(&cfg.sim, &cfg.agent, &cfg.curriculum, seed, &out, resume_from.as_deref(), |r| {
                eprintln!(
                    "stage {} episode {:>5} {:<9} return {:>8.3} steps {:>3} eps {:.3}",
                    r.stage,
                    r.global_episode,
                    format!("{:?}", r.outcome).to_lowercase(),
                    r.ret,
                    r.steps,
                    r.epsilon
                );
            })?;
            println!("{}  {}", res.checkpoint_sha256, res.final_checkpoint.display());
            Ok(())
        }
        Command::Eval {
            checkpoint,
            planner,
            reference,
            counts,
            episodes,
            dynamic_fraction,
            trace_dir,
            trace_episodes,
        } => {
            let b = &mut cfg.benchmark;
            if let Some(c) = checkpoint {
                b.checkpoint = Some(c);
            }
            if let Some(p) = planner {
                b.planner = planner_id(&p)?;
            }
            if let Some(r) = reference {
                b.reference = Some(planner_id(&r)?);
            }
            if let Some(c) = counts {
                b.obstacle_counts = c;
            }
            if let Some(n) = episodes {
                b.episodes = n;
            }
            if let Some(f) = dynamic_fraction {
                b.dynamic_fraction = f;
            }
            if let Some(s) = cli.seed {
                b.seed = s;
            }
            b.validate()?;
            let format: ReportFormat = cli.format.as_deref().unwrap_or("csv").parse().map_err(usage)?;

            let planner = Planner::load(cfg.benchmark.planner, &cfg)?;
            let reference = cfg.benchmark.reference.map(|id| Planner::load(id, &cfg)).transpose()?;
            let progress = |r: &dovs_bench::EpisodeResult| {
                if r.episode + 1 == cfg.benchmark.episodes {
                    eprintln!("{} obstacles done", r.obstacles);
                }
            };
            let run = run_benchmark_with(&cfg.benchmark, &cfg.sim, &planner, progress)?;
            let ref_run = match &reference {
                Some(p) => Some(run_benchmark_with(&cfg.benchmark, &cfg.sim, p, |_| {})?),
                None => None,
            };
            let rows = aggregate(&run.episodes, ref_run.as_ref().map(|r| r.episodes.as_slice()));

            if let Some(dir) = trace_dir {
                fs::create_dir_all(&dir)?;
                for &count in &cfg.benchmark.obstacle_counts {
                    let spec = benchmark_spec(count, cfg.benchmark.dynamic_fraction);
                    for ep in 0..trace_episodes.min(cfg.benchmark.episodes) {
                        let seed = scenario_seed(cfg.benchmark.seed, count, ep);
                        let (_, _, _, trace) = run_episode(&planner, &spec, seed, &cfg.sim, true)?;
                        let path = dir.join(format!("{}_{count:02}_{ep:03}.jsonl", planner.id().name()));
                        let file = fs::File::create(path)?;
                        trace.expect("recorded").write_jsonl(io::BufWriter::new(file))?;
                    }
                }
            }

            match cli.out {
                Some(path) => emit_report(&rows, format, &path),
                None => {
                    let bytes = match format {
                        ReportFormat::Csv => render_csv(&rows)?,
                        ReportFormat::Json => render_json(&rows)?,
                    };
                    write_output(None, &bytes)
                }
            }
        }
        Command::Replay { trace, scale } => {
            let file = fs::File::open(&trace)?;
            let trace = Trace::read_jsonl(BufReader::new(file))?;
            let svg = export_trajectory_svg(&trace, scale)?;
            write_output(cli.out.as_deref(), svg.as_bytes())
        }
        Command::DovsDump {
            scenario,
            obstacles,
            pose,
            vel,
            pixels,
        } => {
            let mut world = match scenario {
                Some(path) => read_world(&path)?,
                None => {
                    let spec = ScenarioSpec::with_obstacles(obstacles, ObstacleMix::Dynamic);
                    spawn_scenario(&spec, cli.seed.unwrap_or(0), &cfg.sim)?
                }
            };
            if let Some(p) = pose {
                world.robot.pose = Pose::new(p[0], p[1], p[2]);
            }
            if let Some(v) = vel {
                world.robot.vel = Velocity::new(v[0], v[1]);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(world.seed);
            let obs = observe(&world, &cfg.sim, &mut rng);
            let bytes = match cli.format.as_deref().unwrap_or("csv") {
                "csv" => obs.state.grid.to_csv().into_bytes(),
                "pgm" => obs.state.grid.to_pgm(pixels),
                other => return Err(usage(format!("unknown grid format {other:?}, expected csv or pgm"))),
            };
            write_output(cli.out.as_deref(), &bytes)
        }
    }
}

fn read_world(path: &Path) -> Result<World, BenchError> {
    let text = fs::read_to_string(path)?;
    if let Ok(world) = serde_json::from_str::<World>(&text) {
        return Ok(world);
    }
    let first = text.lines().next().unwrap_or_default();
    match serde_json::from_str::<TraceLine>(first) {
        Ok(TraceLine::Header { world, .. }) => Ok(world),
        _ => Err(usage(format!("{} is neither a world nor a trace", path.display()))),
    }
}
