//! The seat-level policy interface shared by learned, scripted and human players.

use rand::Rng;
use thiserror::Error;

use crate::approximator::{Network, NetworkSpec, ParamStore, RecurrentState};
use crate::env::{Layout, WorldState, NUM_ACTIONS};

/// What a policy sees when asked to act.
pub struct SeatView<'a> {
    pub state: &'a WorldState,
    pub layout: &'a Layout,
    pub seat: usize,
    /// Egocentric features from [`crate::env::encode_observation`].
    pub features: &'a [f64],
}

pub type ActionDistribution = [f64; NUM_ACTIONS];

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy produced an invalid distribution: {0:?}")]
    InvalidDistribution(Vec<f64>),
    #[error("observation has length {got}, network expects {expected}")]
    InputMismatch { expected: usize, got: usize },
    #[error("{0}")]
    Other(String),
}

pub trait Policy {
    /// Called at the start of every episode. Policies with internal
    /// randomness or memory reseed and clear it here.
    fn reset(&mut self, _seed: u64) {}

    fn distribution(&mut self, view: &SeatView<'_>) -> Result<ActionDistribution, PolicyError>;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn reset(&mut self, seed: u64) {
        (**self).reset(seed)
    }

    fn distribution(&mut self, view: &SeatView<'_>) -> Result<ActionDistribution, PolicyError> {
        (**self).distribution(view)
    }
}

/// Inverse-CDF draw from a categorical distribution.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left a sliver of mass; fall back to the last nonzero entry.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

pub fn one_hot_distribution(action: usize) -> ActionDistribution {
    let mut d = [0.0; NUM_ACTIONS];
    d[action] = 1.0;
    d
}

/// Always stays in place.
#[derive(Clone, Copy, Debug, Default)]
pub struct StayPolicy;

impl Policy for StayPolicy {
    fn distribution(&mut self, _view: &SeatView<'_>) -> Result<ActionDistribution, PolicyError> {
        Ok(one_hot_distribution(crate::env::Action::Stay.index()))
    }
}

/// Uniform over all six actions.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformPolicy;

impl Policy for UniformPolicy {
    fn distribution(&mut self, _view: &SeatView<'_>) -> Result<ActionDistribution, PolicyError> {
        Ok([1.0 / NUM_ACTIONS as f64; NUM_ACTIONS])
    }
}

/// Mixes another policy's distribution with uniform noise.
#[derive(Clone, Debug)]
pub struct NoisyPolicy<P> {
    pub inner: P,
    /// Weight on the uniform component.
    pub epsilon: f64,
}

impl<P: Policy> Policy for NoisyPolicy<P> {
    fn reset(&mut self, seed: u64) {
        self.inner.reset(seed)
    }

    fn distribution(&mut self, view: &SeatView<'_>) -> Result<ActionDistribution, PolicyError> {
        let mut d = self.inner.distribution(view)?;
        for p in d.iter_mut() {
            *p = (1.0 - self.epsilon) * *p + self.epsilon / NUM_ACTIONS as f64;
        }
        Ok(d)
    }
}

/// A network's low-level head under a fixed prior, acting on the egocentric
/// observation. Flat policies use prior 0.
#[derive(Clone, Debug)]
pub struct NetworkPolicy {
    net: Network,
    params: ParamStore,
    prior: usize,
    state: RecurrentState,
}

impl NetworkPolicy {
    pub fn new(net: Network, params: ParamStore) -> Self {
        let state = net.initial_state();
        Self { net, params, prior: 0, state }
    }

    pub fn from_spec(spec: NetworkSpec, params: ParamStore) -> Result<Self, PolicyError> {
        let net = Network::new(spec).map_err(|e| PolicyError::Other(e.to_string()))?;
        if params.len() != net.param_count() {
            return Err(PolicyError::Other(format!("expected {} parameters, got {}", net.param_count(), params.len())));
        }
        Ok(Self::new(net, params))
    }

    pub fn with_prior(mut self, prior: usize) -> Self {
        self.prior = prior;
        self
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }
}

impl Policy for NetworkPolicy {
    fn reset(&mut self, _seed: u64) {
        self.state = self.net.initial_state();
    }

    fn distribution(&mut self, view: &SeatView<'_>) -> Result<ActionDistribution, PolicyError> {
        let (out, next, _) = self
            .net
            .forward(&self.params, view.features, &self.state, Some(self.prior))
            .map_err(|e| PolicyError::Other(e.to_string()))?;
        self.state = next;
        let probs = out.low_probs().expect("prior supplied");
        probs.try_into().map_err(PolicyError::InvalidDistribution)
    }
}
