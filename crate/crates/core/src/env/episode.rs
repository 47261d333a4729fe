use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::engine::{reset, step, StepError};
use super::layout::Layout;
use super::observation::encode_observation;
use super::state::{Action, ShapingConfig};
use super::trajectory::TrajectoryRecord;
use crate::policy::{sample_categorical, Policy, PolicyError, SeatView};

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("seat {seat}: {source}")]
    Policy { seat: usize, source: PolicyError },
    #[error(transparent)]
    Step(#[from] StepError),
}

/// One seat's view of one tick.
#[derive(Clone, Debug, PartialEq)]
pub struct SeatStep {
    pub observation: Vec<f64>,
    pub action: Action,
    /// Sparse plus shaped reward for this seat.
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub seats: [Vec<SeatStep>; 2],
    pub log: Vec<TrajectoryRecord>,
    /// Sum of sparse rewards.
    pub episode_return: u32,
}

impl Episode {
    pub fn deliveries(&self) -> usize {
        self.log.iter().map(|r| r.deliveries()).sum()
    }
}

/// Play `horizon` ticks with `policy_a` in seat 0 and `policy_b` in seat 1.
///
/// Actions are sampled from one RNG seeded with `seed`, seat 0 first; each
/// policy is reset with a seed drawn from the same stream.
pub fn run_episode(
    policy_a: &mut dyn Policy,
    policy_b: &mut dyn Policy,
    layout: &Layout,
    horizon: u32,
    shaping: &ShapingConfig,
    seed: u64,
) -> Result<Episode, EpisodeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    policy_a.reset(rng.random());
    policy_b.reset(rng.random());
    let mut state = reset(layout);
    let mut seats: [Vec<SeatStep>; 2] = [Vec::with_capacity(horizon as usize), Vec::with_capacity(horizon as usize)];
    let mut log = Vec::with_capacity(horizon as usize);
    let episode_id = format!("{}-{seed}", layout.name);

    for _ in 0..horizon {
        let obs = [encode_observation(&state, layout, 0), encode_observation(&state, layout, 1)];
        let mut joint = [Action::Stay; 2];
        for seat in 0..2 {
            let view = SeatView { state: &state, layout, seat, features: &obs[seat] };
            let policy: &mut dyn Policy = if seat == 0 { &mut *policy_a } else { &mut *policy_b };
            let dist = policy.distribution(&view).map_err(|source| EpisodeError::Policy { seat, source })?;
            joint[seat] = Action::ALL[sample_categorical(&dist, &mut rng)];
        }
        let outcome = step(&state, joint, layout, shaping, horizon)?;
        let [obs0, obs1] = obs;
        for (seat, observation) in [(0, obs0), (1, obs1)] {
            seats[seat].push(SeatStep { observation, action: joint[seat], reward: outcome.training_reward(seat) });
        }
        log.push(TrajectoryRecord::from_outcome(&episode_id, &layout.name, state.tick, joint, &outcome));
        state = outcome.next_state;
    }

    Ok(Episode { seats, log, episode_return: state.score })
}
