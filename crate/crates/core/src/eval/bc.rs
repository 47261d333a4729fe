use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EvalError;
use crate::approximator::{
    adam_update, load_model, save_model, Activation, AdamState, Gradient, HeadCotangents, LrSchedule, Network,
    NetworkSpec, ParamStore, RecurrentState,
};
use crate::env::{
    encode_observation, group_episodes, observation_len, reset, run_episode, step, write_jsonl, Layout, ReplayError,
    ShapingConfig, TrajectoryRecord, NUM_ACTIONS,
};
use crate::math::softmax;
use crate::policy::{NetworkPolicy, Policy};

/// (observation, action) pairs recovered by re-simulating trajectory logs.
#[derive(Clone, Debug, PartialEq)]
pub struct BcDataset {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub episodes: Vec<String>,
    /// SHA-256 over the source records as JSONL.
    pub digest: String,
}

impl BcDataset {
    /// Replays each episode from reset, checking logged digests, and emits one
    /// sample per tick for each seat in `seats`.
    pub fn from_records(
        records: &[TrajectoryRecord],
        layout: &Layout,
        seats: &[usize],
        horizon: u32,
    ) -> Result<Self, EvalError> {
        let mut data = Self {
            observations: Vec::new(),
            actions: Vec::new(),
            episodes: Vec::new(),
            digest: records_digest(records),
        };
        for (id, episode) in group_episodes(records) {
            let mut state = reset(layout);
            for r in &episode {
                if r.tick != state.tick {
                    return Err(ReplayError::TickGap { tick: r.tick }.into());
                }
                for &seat in seats {
                    data.observations.push(encode_observation(&state, layout, seat));
                    data.actions.push(r.joint_action[seat].index());
                }
                let outcome = step(&state, r.joint_action, layout, &ShapingConfig::disabled(), horizon)
                    .map_err(ReplayError::from)?;
                let digest = outcome.next_state.digest();
                if digest != r.state_digest {
                    return Err(ReplayError::DigestMismatch {
                        tick: r.tick,
                        logged: r.state_digest.clone(),
                        simulated: digest,
                    }
                    .into());
                }
                state = outcome.next_state;
            }
            data.episodes.push(id);
        }
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn action_counts(&self) -> [usize; NUM_ACTIONS] {
        let mut counts = [0; NUM_ACTIONS];
        for &a in &self.actions {
            counts[a] += 1;
        }
        counts
    }
}

pub fn records_digest(records: &[TrajectoryRecord]) -> String {
    let mut bytes = Vec::new();
    write_jsonl(&mut bytes, records).expect("writing to memory");
    hex::encode(Sha256::digest(&bytes))
}

/// Log `episodes` episodes of a pairing, each with a distinct episode id.
pub fn record_episodes(
    seat0: &mut dyn Policy,
    seat1: &mut dyn Policy,
    layout: &Layout,
    horizon: u32,
    episodes: usize,
    seed: u64,
) -> Result<Vec<TrajectoryRecord>, EvalError> {
    let mut out = Vec::with_capacity(episodes * horizon as usize);
    for k in 0..episodes as u64 {
        let ep = run_episode(seat0, seat1, layout, horizon, &ShapingConfig::disabled(), seed.wrapping_add(k))?;
        out.extend(ep.log);
    }
    Ok(out)
}

/// Deterministically move a fraction of whole episodes to a held-out split.
pub fn split_by_episode(
    records: &[TrajectoryRecord],
    heldout_fraction: f64,
    seed: u64,
) -> (Vec<TrajectoryRecord>, Vec<TrajectoryRecord>) {
    let mut ids: Vec<String> = group_episodes(records).into_iter().map(|(id, _)| id).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = ((ids.len() as f64 * heldout_fraction).round() as usize).min(ids.len());
    let heldout: BTreeSet<String> = ids[..k].iter().cloned().collect();
    records.iter().cloned().partition(|r| !heldout.contains(&r.episode))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcConfig {
    pub trunk: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub learning_rate: f64,
    pub minibatch_size: usize,
    /// Seats whose actions are cloned.
    pub seats: Vec<usize>,
    pub horizon: u32,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            trunk: vec![64, 64],
            activation: Activation::Tanh,
            epochs: 30,
            learning_rate: 3e-3,
            minibatch_size: 128,
            seats: vec![0, 1],
            horizon: crate::env::DEFAULT_HORIZON,
            seed: 0,
        }
    }
}

/// A supervised observation-to-action classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcModel {
    pub spec: NetworkSpec,
    #[serde(skip)]
    pub params: ParamStore,
    pub layout: String,
    pub dataset_digest: String,
    pub train_episodes: Vec<String>,
    pub heldout_episodes: Vec<String>,
    pub heldout_accuracy: f64,
    /// Mean cross-entropy on the training split after each epoch.
    pub train_loss: Vec<f64>,
    pub warnings: Vec<String>,
}

impl BcModel {
    pub fn policy(&self) -> NetworkPolicy {
        NetworkPolicy::new(Network::new(self.spec.clone()).expect("validated spec"), self.params.clone())
    }

    /// `{name}.model` plus a `{name}.json` sidecar.
    pub fn save(&self, dir: &Path, name: &str) -> Result<(), EvalError> {
        std::fs::create_dir_all(dir).map_err(|e| EvalError::Io(e.to_string()))?;
        save_model(&dir.join(format!("{name}.model")), &self.spec, &self.params)
            .map_err(|e| EvalError::Io(e.to_string()))?;
        let json = serde_json::to_string_pretty(self).map_err(|e| EvalError::Io(e.to_string()))?;
        std::fs::write(dir.join(format!("{name}.json")), json).map_err(|e| EvalError::Io(e.to_string()))
    }

    pub fn load(dir: &Path, name: &str) -> Result<Self, EvalError> {
        let (spec, params) = load_model(&dir.join(format!("{name}.model")))?;
        let text =
            std::fs::read_to_string(dir.join(format!("{name}.json"))).map_err(|e| EvalError::Io(e.to_string()))?;
        let mut model: BcModel = serde_json::from_str(&text).map_err(|e| EvalError::Io(e.to_string()))?;
        if model.spec != spec {
            return Err(EvalError::Io("sidecar spec does not match model file".into()));
        }
        model.params = params;
        Ok(model)
    }

    /// Top-1 accuracy of the argmax action.
    pub fn accuracy(&self, data: &BcDataset) -> f64 {
        let net = Network::new(self.spec.clone()).expect("validated spec");
        accuracy(&net, &self.params, data)
    }
}

fn low_logits(
    net: &Network,
    params: &ParamStore,
    x: &[f64],
) -> Result<(Vec<f64>, crate::approximator::ForwardCache), EvalError> {
    let (out, _, cache) = net.forward(params, x, &RecurrentState::zeros(0), Some(0))?;
    Ok((out.low_logits.expect("prior supplied"), cache))
}

fn accuracy(net: &Network, params: &ParamStore, data: &BcDataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits = data
        .observations
        .iter()
        .zip(&data.actions)
        .filter(|(x, &a)| {
            let logits = low_logits(net, params, x).expect("dimensions checked").0;
            let best = (0..logits.len()).fold(0, |b, i| if logits[i] > logits[b] { i } else { b });
            best == a
        })
        .count();
    hits as f64 / data.len() as f64
}

fn mean_cross_entropy(net: &Network, params: &ParamStore, data: &BcDataset) -> Result<f64, EvalError> {
    let mut total = 0.0;
    for (x, &a) in data.observations.iter().zip(&data.actions) {
        let probs = softmax(&low_logits(net, params, x)?.0);
        total -= probs[a].max(1e-300).ln();
    }
    Ok(total / data.len() as f64)
}

/// Cross-entropy training on `train`, scored on the episode-disjoint `heldout`.
pub fn train_bc(
    train: &[TrajectoryRecord],
    heldout: &[TrajectoryRecord],
    layout: &Layout,
    config: &BcConfig,
) -> Result<BcModel, EvalError> {
    let train_ids: BTreeSet<&str> = train.iter().map(|r| r.episode.as_str()).collect();
    let shared: Vec<String> = heldout
        .iter()
        .map(|r| r.episode.as_str())
        .filter(|id| train_ids.contains(id))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(String::from)
        .collect();
    if !shared.is_empty() {
        return Err(EvalError::EpisodeOverlap(shared));
    }
    if config.epochs == 0 || config.minibatch_size == 0 || config.seats.is_empty() {
        return Err(EvalError::InvalidSuite("bc needs epochs, a minibatch size and seats".into()));
    }
    let train_data = BcDataset::from_records(train, layout, &config.seats, config.horizon)?;
    let heldout_data = BcDataset::from_records(heldout, layout, &config.seats, config.horizon)?;
    if train_data.is_empty() {
        return Err(EvalError::EmptyDataset);
    }

    let mut warnings = Vec::new();
    let used = train_data.action_counts().iter().filter(|&&c| c > 0).count();
    if used == 1 {
        let msg = "training data contains a single action; the clone is a constant policy".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    if heldout_data.is_empty() {
        warnings.push("no held-out episodes; accuracy is not measured".into());
    }

    let spec = NetworkSpec {
        activation: config.activation,
        ..NetworkSpec::flat(observation_len(layout), config.trunk.clone())
    };
    let net = Network::new(spec.clone())?;
    let mut params = net.init_params(config.seed);
    let mut adam = AdamState::new(params.len());
    let schedule = LrSchedule::constant(config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xbc);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut grad = Gradient::zeros(params.len());
    let mut train_loss = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.minibatch_size) {
            grad.fill_zero();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (logits, cache) = low_logits(&net, &params, &train_data.observations[i])?;
                let mut d = softmax(&logits);
                d[train_data.actions[i]] -= 1.0;
                d.iter_mut().for_each(|x| *x *= scale);
                let cot = HeadCotangents { low_logits: Some(d), ..Default::default() };
                net.backward(&params, &cache, &cot, &mut grad)?;
            }
            adam_update(&mut params, &grad, &mut adam, &schedule)?;
        }
        let loss = mean_cross_entropy(&net, &params, &train_data)?;
        log::debug!("bc epoch {epoch}: train loss {loss:.4}");
        train_loss.push(loss);
    }

    Ok(BcModel {
        heldout_accuracy: accuracy(&net, &params, &heldout_data),
        spec,
        params,
        layout: layout.name.clone(),
        dataset_digest: train_data.digest,
        train_episodes: train_data.episodes,
        heldout_episodes: heldout_data.episodes,
        train_loss,
        warnings,
    })
}
