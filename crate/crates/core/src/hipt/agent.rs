use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::reward::marginal_low_policy;
use super::HiptError;
use crate::approximator::{Network, NetworkSpec, ParamStore, RecurrentState};
use crate::math::softmax;
use crate::policy::{ActionDistribution, Policy, PolicyError, SeatView};

/// Executed-horizon bounds for a sub-policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonBounds {
    pub p_min: u32,
    pub p_max: u32,
}

impl Default for HorizonBounds {
    fn default() -> Self {
        Self { p_min: 20, p_max: 40 }
    }
}

impl HorizonBounds {
    pub fn validate(&self, horizon: u32) -> Result<(), HiptError> {
        if self.p_min >= 1 && self.p_min <= self.p_max && self.p_max <= horizon {
            Ok(())
        } else {
            Err(HiptError::InvalidConfig(format!("horizon bounds {self:?} for T = {horizon}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.random_range(self.p_min..=self.p_max)
    }
}

/// Heads evaluated at one state: high distribution, every conditioned low
/// distribution, both values.
#[derive(Clone, Debug, PartialEq)]
pub struct HiptHeads {
    pub high: Vec<f64>,
    pub low: Vec<Vec<f64>>,
    pub value_high: f64,
    pub value_low: f64,
}

/// A bi-level policy network and its sub-policy horizon bounds.
#[derive(Clone, Debug)]
pub struct HiptAgent {
    net: Network,
    pub params: ParamStore,
    pub bounds: HorizonBounds,
}

impl HiptAgent {
    pub fn new(spec: NetworkSpec, params: ParamStore, bounds: HorizonBounds) -> Result<Self, HiptError> {
        let net = Network::new(spec)?;
        if params.len() != net.param_count() {
            return Err(HiptError::InvalidConfig(format!(
                "expected {} parameters, got {}",
                net.param_count(),
                params.len()
            )));
        }
        Ok(Self { net, params, bounds })
    }

    pub fn init(spec: NetworkSpec, seed: u64, bounds: HorizonBounds) -> Result<Self, HiptError> {
        let net = Network::new(spec)?;
        let params = net.init_params(seed);
        Ok(Self { net, params, bounds })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn spec(&self) -> &NetworkSpec {
        self.net.spec()
    }

    pub fn num_priors(&self) -> usize {
        self.net.spec().num_priors
    }

    /// Evaluate every head at one observation and advance the recurrent state.
    pub fn heads(&self, observation: &[f64], state: &RecurrentState) -> Result<(HiptHeads, RecurrentState), HiptError> {
        let (out, next, cache) = self.net.forward(&self.params, observation, state, None)?;
        let low = self.net.all_low_logits(&self.params, cache.features()).iter().map(|l| softmax(l)).collect();
        let heads = HiptHeads { high: out.high_probs(), low, value_high: out.value_high, value_low: out.value_low };
        Ok((heads, next))
    }

    pub fn marginal_low_policy(&self, observation: &[f64], state: &RecurrentState) -> Result<Vec<f64>, HiptError> {
        let (h, _) = self.heads(observation, state)?;
        Ok(marginal_low_policy(&h.high, &h.low))
    }

    /// A seat-level policy that samples sub-policies and horizons itself.
    pub fn policy(&self) -> HiptPolicy {
        HiptPolicy::new(self.clone())
    }
}

/// [`HiptAgent`] behind the [`Policy`] trait. At each decision point it
/// draws `p` uniformly from the bounds and `z` from the high head, then
/// follows the low head under `z` for `p` steps.
#[derive(Clone, Debug)]
pub struct HiptPolicy {
    agent: HiptAgent,
    state: RecurrentState,
    rng: ChaCha8Rng,
    active: usize,
    remaining: u32,
    /// Prior and executed-horizon of each decision this episode.
    pub decisions: Vec<(usize, u32)>,
}

impl HiptPolicy {
    pub fn new(agent: HiptAgent) -> Self {
        let state = agent.network().initial_state();
        Self { agent, state, rng: ChaCha8Rng::seed_from_u64(0), active: 0, remaining: 0, decisions: Vec::new() }
    }

    pub fn agent(&self) -> &HiptAgent {
        &self.agent
    }

    pub fn active_prior(&self) -> usize {
        self.active
    }
}

impl Policy for HiptPolicy {
    fn reset(&mut self, seed: u64) {
        self.state = self.agent.network().initial_state();
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.remaining = 0;
        self.decisions.clear();
    }

    fn distribution(&mut self, view: &SeatView<'_>) -> Result<ActionDistribution, PolicyError> {
        let (heads, next) =
            self.agent.heads(view.features, &self.state).map_err(|e| PolicyError::Other(e.to_string()))?;
        self.state = next;
        if self.remaining == 0 {
            let p = self.agent.bounds.sample(&mut self.rng);
            self.active = crate::policy::sample_categorical(&heads.high, &mut self.rng);
            self.remaining = p;
            self.decisions.push((self.active, p));
        }
        self.remaining -= 1;
        heads.low[self.active].clone().try_into().map_err(PolicyError::InvalidDistribution)
    }
}
