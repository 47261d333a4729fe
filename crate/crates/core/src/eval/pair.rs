use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::env::{run_episode, Layout, ShapingConfig};
use crate::math::{mean, std_dev};
use crate::policy::Policy;

/// Sparse returns of a pairing, in play order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub returns: Vec<f64>,
    /// Seat the agent occupied in each episode.
    pub agent_seats: Vec<usize>,
}

impl PairStats {
    pub fn mean(&self) -> f64 {
        mean(&self.returns)
    }

    pub fn std(&self) -> f64 {
        std_dev(&self.returns)
    }

    pub fn n(&self) -> usize {
        self.returns.len()
    }

    /// Returns from episodes where the agent sat in `seat`.
    pub fn seat_returns(&self, seat: usize) -> Vec<f64> {
        self.returns.iter().zip(&self.agent_seats).filter(|(_, &s)| s == seat).map(|(r, _)| *r).collect()
    }
}

/// Play `episodes` episodes in each seat assignment with shaping off.
pub fn evaluate_pair(
    agent: &mut dyn Policy,
    partner: &mut dyn Policy,
    layout: &Layout,
    horizon: u32,
    episodes: usize,
    seed: u64,
) -> Result<PairStats, EvalError> {
    evaluate_pair_seats(agent, partner, layout, horizon, episodes, seed, &[0, 1])
}

/// As [`evaluate_pair`] over an explicit set of agent seats.
pub fn evaluate_pair_seats(
    agent: &mut dyn Policy,
    partner: &mut dyn Policy,
    layout: &Layout,
    horizon: u32,
    episodes: usize,
    seed: u64,
    seats: &[usize],
) -> Result<PairStats, EvalError> {
    if episodes == 0 {
        return Err(EvalError::NoEpisodes);
    }
    let shaping = ShapingConfig::disabled();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = PairStats { returns: Vec::new(), agent_seats: Vec::new() };
    for &seat in seats {
        for _ in 0..episodes {
            let ep_seed = rng.random();
            let ep = if seat == 0 {
                run_episode(agent, partner, layout, horizon, &shaping, ep_seed)?
            } else {
                run_episode(partner, agent, layout, horizon, &shaping, ep_seed)?
            };
            stats.returns.push(ep.episode_return as f64);
            stats.agent_seats.push(seat);
        }
    }
    Ok(stats)
}

/// Mean sparse return of a policy paired with a copy of itself.
pub fn self_play_return<P: Policy + Clone>(
    policy: &P,
    layout: &Layout,
    horizon: u32,
    episodes: usize,
    seed: u64,
) -> Result<PairStats, EvalError> {
    let mut a = policy.clone();
    let mut b = policy.clone();
    evaluate_pair_seats(&mut a, &mut b, layout, horizon, episodes, seed, &[0])
}
