use serde::{Deserialize, Serialize};

use super::gae::compute_gae;
use super::RlError;
use crate::approximator::RecurrentState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    High,
    Low,
}

/// One decision of a policy head.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: usize,
    /// Behavior log-probability of `action`.
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
    /// Recurrent state fed to the network for this decision.
    pub hidden: RecurrentState,
    /// Prior conditioning a low-level decision. `None` at the high level.
    pub prior: Option<usize>,
}

/// Ordered transitions of one episode segment at one level.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryBuffer {
    pub level: Level,
    pub transitions: Vec<Transition>,
    /// High level only: steps each decision actually ran for.
    pub horizons: Vec<u32>,
}

impl TrajectoryBuffer {
    pub fn new(level: Level) -> Self {
        Self { level, transitions: Vec::new(), horizons: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn push(&mut self, t: Transition) -> Result<(), RlError> {
        if !t.reward.is_finite() {
            return Err(RlError::NonFinite("reward"));
        }
        if !(t.log_prob <= 0.0) {
            return Err(RlError::InvalidTransition(format!("log-prob {} above zero", t.log_prob)));
        }
        self.transitions.push(t);
        Ok(())
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    /// Advantages and return targets. `bootstrap` is used only when the
    /// last transition is not terminal.
    pub fn compute_gae(&self, bootstrap: f64, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>), RlError> {
        if self.transitions.is_empty() {
            return Err(RlError::EmptyBuffer);
        }
        let rewards: Vec<f64> = self.transitions.iter().map(|t| t.reward).collect();
        let values: Vec<f64> = self.transitions.iter().map(|t| t.value).collect();
        let dones: Vec<bool> = self.transitions.iter().map(|t| t.done).collect();
        Ok(compute_gae(&rewards, &values, &dones, bootstrap, gamma, lambda))
    }
}

/// Scales rewards by a running standard deviation of the discounted return.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardScaler {
    gamma: f64,
    running: f64,
    count: f64,
    mean: f64,
    m2: f64,
}

impl RewardScaler {
    pub fn new(gamma: f64) -> Self {
        Self { gamma, running: 0.0, count: 0.0, mean: 0.0, m2: 0.0 }
    }

    pub fn std(&self) -> f64 {
        if self.count < 2.0 {
            1.0
        } else {
            (self.m2 / self.count).sqrt().max(1e-4)
        }
    }

    /// Record a raw reward and return it scaled.
    pub fn scale(&mut self, reward: f64) -> f64 {
        self.running = self.running * self.gamma + reward;
        self.count += 1.0;
        let delta = self.running - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (self.running - self.mean);
        reward / self.std()
    }

    pub fn end_episode(&mut self) {
        self.running = 0.0;
    }
}
