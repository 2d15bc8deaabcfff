use serde::{Deserialize, Serialize};

use crate::nn::NnError;
use crate::scalar::Scalar;

/// Linear interpolation from `start` to `end` over `total_steps` updates,
/// constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrSchedule {
    pub start: f64,
    pub end: f64,
    pub total_steps: u64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            start: 3e-4,
            end: 1e-4,
            total_steps: 100_000,
        }
    }
}

impl LrSchedule {
    pub fn at(&self, step: u64) -> f64 {
        if self.total_steps == 0 {
            return self.end;
        }
        let frac = (step as f64 / self.total_steps as f64).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    /// Updates applied so far.
    pub step: u64,
    pub schedule: LrSchedule,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(n_params: usize, schedule: LrSchedule) -> Self {
        Self {
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            step: 0,
            schedule,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Learning rate of the next update.
    pub fn learning_rate(&self) -> f64 {
        self.schedule.at(self.step)
    }
}

/// One bias-corrected Adam step.
pub fn adam_update<T: Scalar>(params: &mut [T], grads: &[T], opt: &mut OptimizerState<T>) -> Result<(), NnError> {
    if grads.len() != params.len() || opt.m.len() != params.len() {
        return Err(NnError::ShapeMismatch {
            expected: params.len(),
            got: if grads.len() != params.len() { grads.len() } else { opt.m.len() },
        });
    }
    let lr = opt.learning_rate();
    opt.step += 1;
    let t = opt.step.min(i32::MAX as u64) as i32;
    let (b1, b2) = (T::lit(opt.beta1), T::lit(opt.beta2));
    let c1 = T::one() / (T::one() - b1.powi(t));
    let c2 = T::one() / (T::one() - b2.powi(t));
    let (lr, eps) = (T::lit(lr), T::lit(opt.eps));
    let one = T::one();
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(opt.m.iter_mut()).zip(opt.v.iter_mut()) {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m * c1;
        let v_hat = *v * c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
