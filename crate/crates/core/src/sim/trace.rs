//! Line-delimited JSON episode traces: a header carrying the spawned world
//! and simulator configuration, then one record per control step.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::kinematics::{Pose, Velocity};
use crate::sim::{reward, step_world, EpisodeStatus, SimConfig, SimError, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    pub robot: Pose<f64>,
    pub robot_vel: Velocity<f64>,
    pub obstacles: Vec<Pose<f64>>,
    pub action: Option<usize>,
    pub command: Velocity<f64>,
    pub reward: f64,
    pub status: EpisodeStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceLine {
    Header { world: World, config: SimConfig },
    Step(StepRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub world: World,
    pub config: SimConfig,
    pub steps: Vec<StepRecord>,
}

impl Trace {
    pub fn new(world: World, config: SimConfig) -> Self {
        Self {
            world,
            config,
            steps: Vec::new(),
        }
    }

    /// Record the state of `after` reached by `command`.
    pub fn push(&mut self, after: &World, action: Option<usize>, command: Velocity<f64>, reward: f64, status: EpisodeStatus) {
        self.steps.push(StepRecord {
            step: after.step_count,
            robot: after.robot.pose,
            robot_vel: after.robot.vel,
            obstacles: after.obstacles.iter().map(|o| o.pose).collect(),
            action,
            command,
            reward,
            status,
        });
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), SimError> {
        let header = TraceLine::Header {
            world: self.world.clone(),
            config: self.config.clone(),
        };
        let to_io = |e: serde_json::Error| SimError::Io(e.into());
        serde_json::to_writer(&mut out, &header).map_err(to_io)?;
        out.write_all(b"\n")?;
        for s in &self.steps {
            serde_json::to_writer(&mut out, &TraceLine::Step(s.clone())).map_err(to_io)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, SimError> {
        let mut lines = input.lines().filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let first = lines
            .next()
            .ok_or_else(|| SimError::MalformedTrace("empty trace".into()))??;
        let parse = |s: &str, n: usize| {
            serde_json::from_str::<TraceLine>(s).map_err(|e| SimError::MalformedTrace(format!("line {n}: {e}")))
        };
        let TraceLine::Header { world, config } = parse(&first, 1)? else {
            return Err(SimError::MalformedTrace("first line must be the header".into()));
        };
        let mut trace = Trace::new(world, config);
        for (n, line) in lines.enumerate() {
            match parse(&line?, n + 2)? {
                TraceLine::Step(s) => trace.steps.push(s),
                TraceLine::Header { .. } => {
                    return Err(SimError::MalformedTrace(format!("line {}: second header", n + 2)))
                }
            }
        }
        Ok(trace)
    }

    /// Re-run the logged commands from the header world; returns the
    /// recomputed (reward, status) of every step.
    pub fn replay(&self) -> Result<Vec<(f64, EpisodeStatus)>, SimError> {
        let mut world = self.world.clone();
        let mut out = Vec::with_capacity(self.steps.len());
        for s in &self.steps {
            let prev = world.clone();
            let status = step_world(&mut world, s.command, &self.config)?;
            out.push((reward(&prev, &world, status, &self.config.reward), status));
        }
        Ok(out)
    }
}
