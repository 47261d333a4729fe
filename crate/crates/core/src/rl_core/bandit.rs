//! Two-armed bandit used as a PPO sanity harness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ppo_update, Level, PpoBatch, PpoConfig, RlError, TrajectoryBuffer, Transition};
use crate::approximator::{AdamState, LrSchedule, Network, NetworkSpec, RecurrentCell};
use crate::policy::sample_categorical;

#[derive(Clone, Debug, PartialEq)]
pub struct BanditReport {
    /// Probability of the rewarded arm after each update.
    pub trace: Vec<f64>,
    /// First update (1-based) after which the rewarded arm reached `target`.
    pub reached_at: Option<usize>,
}

/// Train a linear softmax policy on a bandit that pays 1 on arm 1 and 0 on
/// arm 0, stopping once the rewarded arm reaches probability `target`.
pub fn train_bandit(seed: u64, max_updates: usize, target: f64) -> Result<BanditReport, RlError> {
    let spec = NetworkSpec {
        input_dim: 1,
        trunk: vec![],
        activation: crate::approximator::Activation::Tanh,
        recurrent: RecurrentCell::None,
        num_priors: 1,
        num_actions: 2,
    };
    let net = Network::new(spec)?;
    let mut params = net.init_params(seed);
    let mut adam = AdamState::new(params.len());
    let schedule = LrSchedule::constant(0.03);
    let config = PpoConfig { minibatch_size: 64, scale_rewards: false, ..PpoConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = net.initial_state();
    let obs = [1.0];
    let mut trace = Vec::with_capacity(max_updates);
    let mut reached_at = None;
    for update in 0..max_updates {
        let (out, _, _) = net.forward(&params, &obs, &state, Some(0))?;
        let probs = out.low_probs().expect("prior supplied");
        let mut batch = PpoBatch::default();
        for _ in 0..64 {
            let action = sample_categorical(&probs, &mut rng);
            let mut buf = TrajectoryBuffer::new(Level::Low);
            buf.push(Transition {
                observation: obs.to_vec(),
                action,
                log_prob: probs[action].ln(),
                reward: action as f64,
                value: out.value_low,
                done: true,
                hidden: state.clone(),
                prior: Some(0),
            })?;
            batch.push_buffer(&buf, 0.0, &config)?;
        }
        let progress = update as f64 / max_updates as f64;
        ppo_update(&net, &mut params, &mut adam, &schedule, &batch, &config, progress, None, &mut rng)?;
        let (out, _, _) = net.forward(&params, &obs, &state, Some(0))?;
        let p1 = out.low_probs().expect("prior supplied")[1];
        trace.push(p1);
        if p1 >= target {
            reached_at = Some(update + 1);
            break;
        }
    }
    Ok(BanditReport { trace, reached_at })
}
