use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::jsd::{jsd_grad, jsd_state};
use crate::approximator::{AdamState, LrSchedule, Network, NetworkSpec, ParamStore, RecurrentState};
use crate::env::{encode_into, observation_len, reset, step, Action, Layout, ShapingConfig};
use crate::policy::sample_categorical;
use crate::rl_core::{
    ppo_update, Level, PpoBatch, PpoConfig, Regularizer, RewardScaler, RlError, TrajectoryBuffer, Transition,
    UpdateDiagnostics,
};

/// Rollout data from one batch of self-play episodes.
#[derive(Clone, Debug)]
pub struct SelfPlayBatch {
    pub batch: PpoBatch,
    /// Sparse return of each episode.
    pub returns: Vec<f64>,
    pub env_steps: u64,
}

/// Penalizes agreement with frozen peers: loss = −coef·JSD.
struct JsdRegularizer {
    /// `peer_probs[i]` holds every peer's distribution at low sample `i`.
    peer_probs: Vec<Vec<Vec<f64>>>,
    coef: f64,
}

impl Regularizer for JsdRegularizer {
    fn loss_and_grad(&self, index: usize, probs: &[f64]) -> (f64, Vec<f64>) {
        let mut members = Vec::with_capacity(self.peer_probs[index].len() + 1);
        members.push(probs.to_vec());
        members.extend(self.peer_probs[index].iter().cloned());
        let value = jsd_state(&members).unwrap_or(0.0);
        let grad = jsd_grad(&members, 0).into_iter().map(|g| -self.coef * g).collect();
        (-self.coef * value, grad)
    }
}

/// One self-play learner: a flat network controlling both seats.
#[derive(Clone, Debug)]
pub struct SelfPlayTrainer {
    pub net: Network,
    pub params: ParamStore,
    pub adam: AdamState,
    pub schedule: LrSchedule,
    pub ppo: PpoConfig,
    scalers: [RewardScaler; 2],
    pub updates: u64,
    pub env_steps: u64,
    rng: ChaCha8Rng,
}

impl SelfPlayTrainer {
    pub fn new(spec: NetworkSpec, seed: u64, schedule: LrSchedule, ppo: PpoConfig) -> Result<Self, RlError> {
        let net = Network::new(spec)?;
        let params = net.init_params(seed);
        let adam = AdamState::new(params.len());
        let scalers = [RewardScaler::new(ppo.gamma), RewardScaler::new(ppo.gamma)];
        Ok(Self {
            net,
            params,
            adam,
            schedule,
            ppo,
            scalers,
            updates: 0,
            env_steps: 0,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_5e1f),
        })
    }

    /// Play `episodes` self-play episodes under the current parameters.
    pub fn collect(
        &mut self,
        layout: &Layout,
        horizon: u32,
        shaping: &ShapingConfig,
        episodes: usize,
    ) -> Result<SelfPlayBatch, RlError> {
        let obs_len = observation_len(layout);
        let mut out = SelfPlayBatch { batch: PpoBatch::default(), returns: Vec::with_capacity(episodes), env_steps: 0 };
        let mut obs = [vec![0.0; obs_len], vec![0.0; obs_len]];
        for _ in 0..episodes {
            let mut state = reset(layout);
            let mut hidden = [self.net.initial_state(), self.net.initial_state()];
            let mut buffers = [TrajectoryBuffer::new(Level::Low), TrajectoryBuffer::new(Level::Low)];
            for t in 0..horizon {
                let mut joint = [Action::Stay; 2];
                let mut pending: Vec<(usize, f64, f64, RecurrentState)> = Vec::with_capacity(2);
                for seat in 0..2 {
                    encode_into(&state, layout, seat, &mut obs[seat]);
                    let (head, next, _) = self.net.forward(&self.params, &obs[seat], &hidden[seat], Some(0))?;
                    let probs = head.low_probs().expect("prior supplied");
                    let a = sample_categorical(&probs, &mut self.rng);
                    joint[seat] = Action::ALL[a];
                    let snapshot = std::mem::replace(&mut hidden[seat], next);
                    pending.push((a, probs[a].ln(), head.value_low, snapshot));
                }
                let outcome = step(&state, joint, layout, shaping, horizon)
                    .map_err(|e| RlError::InvalidTransition(e.to_string()))?;
                let done = t + 1 == horizon;
                for (seat, (a, lp, v, h)) in pending.into_iter().enumerate() {
                    let raw = outcome.training_reward(seat);
                    let reward = if self.ppo.scale_rewards { self.scalers[seat].scale(raw) } else { raw };
                    buffers[seat].push(Transition {
                        observation: obs[seat].clone(),
                        action: a,
                        log_prob: lp,
                        reward,
                        value: v,
                        done,
                        hidden: h,
                        prior: Some(0),
                    })?;
                }
                state = outcome.next_state;
            }
            for (seat, buf) in buffers.iter().enumerate() {
                out.batch.push_buffer(buf, 0.0, &self.ppo)?;
                self.scalers[seat].end_episode();
            }
            out.returns.push(state.score as f64);
            out.env_steps += horizon as u64;
        }
        Ok(out)
    }

    /// One PPO update on `data`. Peers, if any, enter through the JSD
    /// term with weight `jsd_coef`; they are evaluated but never updated.
    pub fn update(
        &mut self,
        data: &SelfPlayBatch,
        peers: &[&ParamStore],
        jsd_coef: f64,
        progress: f64,
    ) -> Result<UpdateDiagnostics, RlError> {
        let regularizer = if !peers.is_empty() && jsd_coef > 0.0 {
            let mut peer_probs = Vec::with_capacity(data.batch.low.len());
            for s in &data.batch.low {
                let mut row = Vec::with_capacity(peers.len());
                for p in peers {
                    let (head, _, _) = self.net.forward(p, &s.observation, &s.hidden, Some(0))?;
                    row.push(head.low_probs().expect("prior supplied"));
                }
                peer_probs.push(row);
            }
            Some(JsdRegularizer { peer_probs, coef: jsd_coef })
        } else {
            None
        };
        let reg = regularizer.as_ref().map(|r| r as &dyn Regularizer);
        let diag = ppo_update(
            &self.net,
            &mut self.params,
            &mut self.adam,
            &self.schedule,
            &data.batch,
            &self.ppo,
            progress,
            reg,
            &mut self.rng,
        )?;
        self.updates += 1;
        self.env_steps += data.env_steps;
        Ok(diag)
    }
}
