use serde::{Deserialize, Serialize};

use super::params::{Gradient, ParamStore};
use super::ApproxError;

/// Learning rate decaying linearly from `start` to `start / decay` over
/// `total_updates`, then held.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub start: f64,
    pub decay: f64,
    pub total_updates: u64,
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        Self { start: lr, decay: 1.0, total_updates: 1 }
    }

    pub fn at(&self, update: u64) -> f64 {
        let frac = if self.total_updates == 0 { 1.0 } else { (update as f64 / self.total_updates as f64).min(1.0) };
        let end = self.start / self.decay;
        self.start + (end - self.start) * frac
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { first: vec![0.0; len], second: vec![0.0; len], step: 0, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// One bias-corrected Adam step at the schedule's current learning rate.
/// A non-finite gradient leaves both parameters and moments untouched.
pub fn adam_update(
    params: &mut ParamStore,
    grad: &Gradient,
    state: &mut AdamState,
    schedule: &LrSchedule,
) -> Result<f64, ApproxError> {
    if grad.len() != params.len() || state.first.len() != params.len() {
        return Err(ApproxError::ParamMismatch { expected: params.len(), got: grad.len() });
    }
    if !grad.is_finite() {
        return Err(ApproxError::Diverged("non-finite gradient".into()));
    }
    let lr = schedule.at(state.step);
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, &g), m), v) in
        params.as_mut_slice().iter_mut().zip(grad.as_slice()).zip(state.first.iter_mut()).zip(state.second.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(lr)
}
