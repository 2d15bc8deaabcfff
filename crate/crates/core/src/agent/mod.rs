//! Dueling double DQN with n-step returns, prioritized replay, masked
//! ε-greedy exploration and a staged training curriculum.

pub mod curriculum;
pub mod replay;

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actions::{ActionMask, NUM_ACTIONS};
use crate::dovs::{StateVector, STATE_LEN};
use crate::nn::{adam_update, huber_loss, ArchConfig, LrSchedule, NnError, OptimizerState, QNetwork};
use crate::sim::SimError;

pub use curriculum::{
    epsilon_schedule, run_curriculum, default_stages, CurriculumStage, EpisodeRecord, EpsilonMode, ObstacleSchedule,
    TrainOutput,
};
pub use replay::{PriorityStore, Sample, SumTree};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("no valid action in mask")]
    EmptyMask,
    #[error("transitions are not consecutive at position {0}")]
    NonConsecutive(usize),
    #[error("replay store is empty")]
    EmptyStore,
    #[error("replay holds {have} transitions, training starts at {need}")]
    WarmupNotReached { have: usize, need: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub gamma: f64,
    pub n_step: usize,
    /// Hard target copy every this many training steps.
    pub target_sync_period: u64,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub warmup: usize,
    pub replay_capacity: usize,
    pub priority_alpha: f64,
    pub priority_eps: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub epsilon_floor: f64,
    /// Share of a decay stage over which ε falls from 1 to the floor.
    pub epsilon_decay_fraction: f64,
    pub huber_delta: f64,
    /// Environment steps between training steps.
    pub train_every: u64,
    /// Training steps over which the learning rate and β are annealed;
    /// derived from the curriculum length when absent.
    pub anneal_steps: Option<u64>,
    pub arch: ArchConfig,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.97,
            n_step: 5,
            target_sync_period: 100,
            batch_size: 64,
            lr_start: 3e-4,
            lr_end: 1e-4,
            warmup: 1000,
            replay_capacity: 100_000,
            priority_alpha: 0.6,
            priority_eps: 0.01,
            beta_start: 0.4,
            beta_end: 1.0,
            epsilon_floor: 0.05,
            epsilon_decay_fraction: 0.8,
            huber_delta: 1.0,
            train_every: 4,
            anneal_steps: None,
            arch: ArchConfig::default(),
        }
    }
}

/// One environment step as seen by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: StateVector<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: StateVector<f64>,
    /// True for success and collision; a timeout still bootstraps.
    pub terminal: bool,
    /// Valid actions at `next_state`.
    pub next_mask: ActionMask,
}

/// Discounted sum of up to n rewards and the state it bootstraps from.
#[derive(Debug, Clone, PartialEq)]
pub struct NStepReturn {
    pub ret: f64,
    pub tail_state: StateVector<f64>,
    pub tail_mask: ActionMask,
    pub terminal: bool,
    pub k: usize,
}

/// What the replay store holds.
#[derive(Debug, Clone, PartialEq)]
pub struct NStepTransition {
    pub state: StateVector<f64>,
    pub action: usize,
    pub ret: NStepReturn,
}

/// Lowest-index argmax over the valid entries.
pub fn masked_argmax(q: &[f64], mask: &ActionMask) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (a, &v) in q.iter().enumerate().take(NUM_ACTIONS) {
        if mask.is_valid(a) && best.is_none_or(|b| v > q[b]) {
            best = Some(a);
        }
    }
    best
}

/// ε-greedy over valid actions only.
pub fn select_action<R: Rng + ?Sized>(q: &[f64], mask: &ActionMask, epsilon: f64, rng: &mut R) -> Result<usize, AgentError> {
    let valid: Vec<usize> = mask.valid_indices().collect();
    if valid.is_empty() {
        return Err(AgentError::EmptyMask);
    }
    if rng.random::<f64>() < epsilon {
        Ok(valid[rng.random_range(0..valid.len())])
    } else {
        masked_argmax(q, mask).ok_or(AgentError::EmptyMask)
    }
}

/// Fold a window of consecutive transitions into an n-step return. The
/// window is cut after `n` steps or at the first terminal transition.
pub fn nstep_accumulate(window: &[Transition], gamma: f64, n: usize) -> Result<NStepReturn, AgentError> {
    let first = window.first().ok_or(AgentError::NonConsecutive(0))?;
    let mut ret = 0.0;
    let mut discount = 1.0;
    let mut last = first;
    let mut k = 0;
    for (i, t) in window.iter().take(n.max(1)).enumerate() {
        if i > 0 && window[i - 1].next_state != t.state {
            return Err(AgentError::NonConsecutive(i));
        }
        ret += discount * t.reward;
        discount *= gamma;
        last = t;
        k = i + 1;
        if t.terminal {
            break;
        }
    }
    Ok(NStepReturn {
        ret,
        tail_state: last.next_state.clone(),
        tail_mask: last.next_mask,
        terminal: last.terminal,
        k,
    })
}

/// `R` if terminal, else `R + γ^k Q_target(tail, argmax_valid Q_online(tail))`.
pub fn bootstrap_target(ret: &NStepReturn, q_online: &[f64], q_target: &[f64], gamma: f64) -> f64 {
    if ret.terminal {
        return ret.ret;
    }
    match masked_argmax(q_online, &ret.tail_mask) {
        Some(a) => ret.ret + gamma.powi(ret.k as i32) * q_target[a],
        None => ret.ret,
    }
}

pub fn double_dqn_target(ret: &NStepReturn, online: &QNetwork<f64>, target: &QNetwork<f64>, gamma: f64) -> f64 {
    if ret.terminal {
        return ret.ret;
    }
    bootstrap_target(ret, &online.q_values(&ret.tail_state), &target.q_values(&ret.tail_state), gamma)
}

/// Sliding window turning one-step transitions into n-step ones.
#[derive(Debug, Clone, Default)]
pub struct NStepBuffer {
    window: VecDeque<Transition>,
}

impl NStepBuffer {
    /// Add a transition; returns whatever became complete. Everything is
    /// flushed when `episode_end` is set or the transition is terminal.
    pub fn push(&mut self, t: Transition, episode_end: bool, gamma: f64, n: usize) -> Result<Vec<NStepTransition>, AgentError> {
        let done = episode_end || t.terminal;
        self.window.push_back(t);
        let mut out = Vec::new();
        while self.window.len() >= n || (done && !self.window.is_empty()) {
            let w = self.window.make_contiguous();
            let ret = nstep_accumulate(w, gamma, n)?;
            out.push(NStepTransition {
                state: w[0].state.clone(),
                action: w[0].action,
                ret,
            });
            self.window.pop_front();
        }
        Ok(out)
    }

    pub fn clear(&mut self) {
        self.window.clear();
    }
}

/// Summed Huber loss, TD errors and parameter gradients of a weighted batch.
#[derive(Debug, Clone)]
pub struct TdBatch {
    pub loss_sum: f64,
    pub deltas: Vec<f64>,
    pub grads: Vec<f64>,
}

fn stack(states: impl Iterator<Item = Vec<f64>>) -> Vec<f64> {
    let mut out = Vec::new();
    for s in states {
        out.extend(s);
    }
    out
}

/// Gradient of `sum_i w_i huber(y_i - Q(s_i, a_i))` with the targets held fixed.
pub fn td_gradients(
    online: &QNetwork<f64>,
    target: &QNetwork<f64>,
    batch: &[&NStepTransition],
    weights: &[f64],
    gamma: f64,
    huber_delta: f64,
) -> Result<TdBatch, AgentError> {
    let b = batch.len();
    let boot: Vec<usize> = (0..b).filter(|&i| !batch[i].ret.terminal).collect();
    let mut targets: Vec<f64> = batch.iter().map(|t| t.ret.ret).collect();
    if !boot.is_empty() {
        let tails = stack(boot.iter().map(|&i| batch[i].ret.tail_state.to_vec()));
        let q_on = online.forward_batch(&tails, boot.len())?;
        let q_tg = target.forward_batch(&tails, boot.len())?;
        for (r, &i) in boot.iter().enumerate() {
            targets[i] = bootstrap_target(&batch[i].ret, q_on.q_row(r), q_tg.q_row(r), gamma);
        }
    }
    let states = stack(batch.iter().map(|t| t.state.to_vec()));
    debug_assert_eq!(states.len(), b * STATE_LEN);
    let cache = online.forward_batch(&states, b)?;
    let mut dq = vec![0.0; b * NUM_ACTIONS];
    let mut deltas = Vec::with_capacity(b);
    let mut loss_sum = 0.0;
    for i in 0..b {
        let a = batch[i].action;
        let delta = targets[i] - cache.q_row(i)[a];
        let (l, g) = huber_loss(delta, huber_delta);
        loss_sum += weights[i] * l;
        dq[i * NUM_ACTIONS + a] = -weights[i] * g;
        deltas.push(delta);
    }
    let mut grads = vec![0.0; online.param_count()];
    online.backward(&cache, &dq, &mut grads)?;
    Ok(TdBatch { loss_sum, deltas, grads })
}

/// Learner state: online and target networks, optimizer, replay and the
/// random stream used for exploration and sampling.
#[derive(Debug, Clone)]
pub struct Agent {
    pub hp: Hyperparams,
    pub online: QNetwork<f64>,
    pub target: QNetwork<f64>,
    pub opt: OptimizerState<f64>,
    pub store: PriorityStore,
    pub rng: ChaCha8Rng,
    pub train_steps: u64,
    pub anneal_steps: u64,
    nstep: NStepBuffer,
}

impl Agent {
    pub fn new(hp: Hyperparams, anneal_steps: u64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let online = QNetwork::new(hp.arch, &mut rng);
        Self::with_network(hp, online, anneal_steps, rng)
    }

    pub fn with_network(hp: Hyperparams, online: QNetwork<f64>, anneal_steps: u64, rng: ChaCha8Rng) -> Self {
        let schedule = LrSchedule {
            start: hp.lr_start,
            end: hp.lr_end,
            total_steps: anneal_steps,
        };
        let opt = OptimizerState::new(online.param_count(), schedule);
        Self {
            target: online.clone(),
            online,
            opt,
            store: PriorityStore::new(hp.replay_capacity, hp.priority_alpha, hp.priority_eps),
            rng,
            train_steps: 0,
            anneal_steps,
            nstep: NStepBuffer::default(),
            hp,
        }
    }

    pub fn act(&mut self, state: &StateVector<f64>, mask: &ActionMask, epsilon: f64) -> Result<usize, AgentError> {
        let q = self.online.q_values(state);
        select_action(&q, mask, epsilon, &mut self.rng)
    }

    /// Feed one environment step; completed n-step transitions go to replay.
    pub fn remember(&mut self, t: Transition, episode_end: bool) -> Result<(), AgentError> {
        for item in self.nstep.push(t, episode_end, self.hp.gamma, self.hp.n_step)? {
            self.store.insert(item);
        }
        Ok(())
    }

    pub fn ready(&self) -> bool {
        self.store.len() >= self.hp.warmup.max(1)
    }

    pub fn beta(&self) -> f64 {
        let frac = if self.anneal_steps == 0 {
            1.0
        } else {
            (self.train_steps as f64 / self.anneal_steps as f64).min(1.0)
        };
        self.hp.beta_start + (self.hp.beta_end - self.hp.beta_start) * frac
    }

    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.online);
    }

    /// One prioritized minibatch update; returns the mean weighted loss.
    pub fn train_step(&mut self) -> Result<f64, AgentError> {
        if !self.ready() {
            return Err(AgentError::WarmupNotReached {
                have: self.store.len(),
                need: self.hp.warmup.max(1),
            });
        }
        let sample = self.store.sample(self.hp.batch_size, self.beta(), &mut self.rng)?;
        let batch: Vec<&NStepTransition> = sample.indices.iter().map(|&i| self.store.get(i)).collect();
        let mut td = td_gradients(&self.online, &self.target, &batch, &sample.weights, self.hp.gamma, self.hp.huber_delta)?;
        let scale = 1.0 / batch.len() as f64;
        for g in td.grads.iter_mut() {
            *g *= scale;
        }
        adam_update(self.online.params_mut(), &td.grads, &mut self.opt)?;
        self.store.update(&sample.indices, &td.deltas);
        self.train_steps += 1;
        if self.hp.target_sync_period > 0 && self.train_steps.is_multiple_of(self.hp.target_sync_period) {
            self.sync_target();
        }
        Ok(td.loss_sum * scale)
    }
}
