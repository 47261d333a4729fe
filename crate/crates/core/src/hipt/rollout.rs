use rand::Rng;

use super::agent::HiptAgent;
use super::reward::{high_level_reward, influence_reward};
use super::HiptError;
use crate::env::{encode_into, observation_len, reset, step, Action, Layout, ShapingConfig};
use crate::policy::{sample_categorical, Policy, SeatView};
use crate::rl_core::{Level, TrajectoryBuffer, Transition};

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutSettings {
    pub horizon: u32,
    pub shaping: ShapingConfig,
    /// Influence coefficient κ in the high-level reward.
    pub kappa: f64,
    /// Environment-reward weight α in the high-level reward.
    pub alpha: f64,
    /// Feed shaped components into the high-level reward as well.
    pub high_uses_shaped: bool,
}

/// Both levels of one episode, with unscaled rewards.
#[derive(Clone, Debug)]
pub struct HiptEpisode {
    pub low: TrajectoryBuffer,
    pub high: TrajectoryBuffer,
    /// Per-step influence rewards.
    pub influence: Vec<f64>,
    /// Sparse score of the episode.
    pub env_return: f64,
    pub agent_seat: usize,
}

impl HiptEpisode {
    pub fn executed_horizons(&self) -> &[u32] {
        &self.high.horizons
    }
}

/// Uniform draw over `entries` partner entries.
pub fn sample_partner<R: Rng + ?Sized>(rng: &mut R, entries: usize) -> usize {
    rng.random_range(0..entries)
}

struct Segment {
    observation: Vec<f64>,
    hidden: crate::approximator::RecurrentState,
    z: usize,
    log_prob: f64,
    value: f64,
    planned: u32,
    env: Vec<f64>,
    influence: Vec<f64>,
}

/// One HiPT episode. At each decision point a horizon `p` is drawn
/// uniformly from the agent's bounds and `z` from the high head; the low
/// head then acts under `z` for `p` steps or until the episode ends. Each
/// step records the influence reward of `z`; each finished segment records
/// the high-level reward over the steps it actually ran.
pub fn rollout_episode<R: Rng + ?Sized>(
    agent: &HiptAgent,
    partner: &mut dyn Policy,
    layout: &Layout,
    settings: &RolloutSettings,
    agent_seat: usize,
    rng: &mut R,
) -> Result<HiptEpisode, HiptError> {
    agent.bounds.validate(settings.horizon)?;
    partner.reset(rng.random());
    let partner_seat = 1 - agent_seat;
    let obs_len = observation_len(layout);
    let mut obs = vec![0.0; obs_len];
    let mut partner_obs = vec![0.0; obs_len];
    let mut state = reset(layout);
    let mut hidden = agent.network().initial_state();
    let mut low = TrajectoryBuffer::new(Level::Low);
    let mut high = TrajectoryBuffer::new(Level::High);
    let mut influence = Vec::with_capacity(settings.horizon as usize);
    let mut segment: Option<Segment> = None;

    for t in 0..settings.horizon {
        encode_into(&state, layout, agent_seat, &mut obs);
        let (heads, next_hidden) = agent.heads(&obs, &hidden)?;
        if segment.is_none() {
            let planned = agent.bounds.sample(rng);
            let z = sample_categorical(&heads.high, rng);
            segment = Some(Segment {
                observation: obs.clone(),
                hidden: hidden.clone(),
                z,
                log_prob: heads.high[z].ln(),
                value: heads.value_high,
                planned,
                env: Vec::with_capacity(planned as usize),
                influence: Vec::with_capacity(planned as usize),
            });
        }
        let seg = segment.as_mut().expect("segment started");
        let z = seg.z;
        let probs = &heads.low[z];
        let action = sample_categorical(probs, rng);
        let r_inf = influence_reward(&heads.high, &heads.low, z);

        encode_into(&state, layout, partner_seat, &mut partner_obs);
        let view = SeatView { state: &state, layout, seat: partner_seat, features: &partner_obs };
        let partner_dist = partner.distribution(&view)?;
        let partner_action = sample_categorical(&partner_dist, rng);

        let mut joint = [Action::Stay; 2];
        joint[agent_seat] = Action::ALL[action];
        joint[partner_seat] = Action::ALL[partner_action];
        let outcome = step(&state, joint, layout, &settings.shaping, settings.horizon)?;
        let done = t + 1 == settings.horizon;
        let r_low = outcome.training_reward(agent_seat);
        low.push(Transition {
            observation: obs.clone(),
            action,
            log_prob: probs[action].ln(),
            reward: r_low,
            value: heads.value_low,
            done,
            hidden: std::mem::replace(&mut hidden, next_hidden),
            prior: Some(z),
        })?;
        influence.push(r_inf);
        let r_env = if settings.high_uses_shaped { r_low } else { outcome.sparse_reward as f64 };
        seg.env.push(r_env);
        seg.influence.push(r_inf);
        state = outcome.next_state;

        if seg.env.len() as u32 == seg.planned || done {
            let seg = segment.take().expect("segment open");
            let p = seg.env.len();
            let r_h = high_level_reward(&seg.env, &seg.influence, settings.alpha, settings.kappa, p)?;
            high.push(Transition {
                observation: seg.observation,
                action: seg.z,
                log_prob: seg.log_prob,
                reward: r_h,
                value: seg.value,
                done,
                hidden: seg.hidden,
                prior: None,
            })?;
            high.horizons.push(p as u32);
        }
    }
    Ok(HiptEpisode { low, high, influence, env_return: state.score as f64, agent_seat })
}
