use rand::Rng;

use crate::agent::{AgentError, NStepTransition};

/// Binary tree of partial sums over a fixed number of leaves.
#[derive(Debug, Clone)]
pub struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let leaves = capacity.max(1).next_power_of_two();
        Self {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    /// Set a leaf; every ancestor is recomputed from its two children.
    pub fn set(&mut self, i: usize, value: f64) {
        let mut k = self.leaves + i;
        self.nodes[k] = value;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leaf whose cumulative range contains `u`, with `0 <= u <= total`.
    pub fn find(&self, mut u: f64) -> usize {
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            if u < left || self.nodes[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        k - self.leaves
    }

    pub fn leaf_sum(&self) -> f64 {
        self.nodes[self.leaves..].iter().sum()
    }
}

/// Ring buffer with proportional prioritized sampling.
#[derive(Debug, Clone)]
pub struct PriorityStore {
    capacity: usize,
    items: Vec<NStepTransition>,
    next: usize,
    tree: SumTree,
    max_priority: f64,
    pub alpha: f64,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl PriorityStore {
    pub fn new(capacity: usize, alpha: f64, eps: f64) -> Self {
        Self {
            capacity,
            items: Vec::new(),
            next: 0,
            tree: SumTree::new(capacity),
            max_priority: 1.0,
            alpha,
            eps,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> &NStepTransition {
        &self.items[i]
    }

    pub fn priority(&self, i: usize) -> f64 {
        self.tree.get(i)
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    /// Priority of an error magnitude: `(|delta| + eps)^alpha`.
    pub fn priority_of(&self, delta: f64) -> f64 {
        (delta.abs() + self.eps).powf(self.alpha)
    }

    /// Insert with the largest priority seen so far.
    pub fn insert(&mut self, t: NStepTransition) -> usize {
        self.insert_with_priority(t, self.max_priority)
    }

    /// Insert with an explicit (already exponentiated) priority.
    pub fn insert_with_priority(&mut self, t: NStepTransition, priority: f64) -> usize {
        let i = self.next;
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[i] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.set_priority(i, priority);
        i
    }

    fn set_priority(&mut self, i: usize, p: f64) {
        let p = p.max(f64::MIN_POSITIVE);
        self.max_priority = self.max_priority.max(p);
        self.tree.set(i, p);
    }

    /// Stratified proportional sampling with max-normalized importance weights.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, beta: f64, rng: &mut R) -> Result<Sample, AgentError> {
        if self.items.is_empty() {
            return Err(AgentError::EmptyStore);
        }
        let total = self.tree.total();
        let seg = total / batch as f64;
        let indices: Vec<usize> = (0..batch)
            .map(|k| {
                let u = seg * (k as f64 + rng.random::<f64>());
                self.tree.find(u.min(total)).min(self.items.len() - 1)
            })
            .collect();
        let weights = self.weights(&indices, beta);
        Ok(Sample { indices, weights })
    }

    /// `(N P(i))^-beta`, divided by the largest weight among `indices`.
    pub fn weights(&self, indices: &[usize], beta: f64) -> Vec<f64> {
        let n = self.items.len() as f64;
        let total = self.tree.total();
        let raw: Vec<f64> = indices.iter().map(|&i| (n * self.tree.get(i) / total).powf(-beta)).collect();
        let max = raw.iter().copied().fold(0.0, f64::max);
        raw.iter().map(|w| w / max).collect()
    }

    pub fn update(&mut self, indices: &[usize], deltas: &[f64]) {
        for (&i, &d) in indices.iter().zip(deltas) {
            let p = self.priority_of(d);
            self.set_priority(i, p);
        }
    }
}
