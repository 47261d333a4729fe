use std::path::Path;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{HiptAgent, HorizonBounds};
use super::reward::InfluenceSchedule;
use super::rollout::{rollout_episode, sample_partner, RolloutSettings};
use super::HiptError;
use crate::approximator::{load_model, save_model, Activation, AdamState, LrSchedule, NetworkSpec, RecurrentCell};
use crate::env::{observation_len, shaping_factor, Layout, ShapingConfig, DEFAULT_HORIZON, NUM_ACTIONS};
use crate::eval::evaluate_pair;
use crate::math::mean;
use crate::policy::NetworkPolicy;
use crate::population::{PartnerPopulation, Tier};
use crate::rl_core::{ppo_update, Level, MetricsLog, MetricsRecord, PpoBatch, PpoConfig, RewardScaler, RlError};

/// Sub-policy count used for each bundled layout.
pub fn default_num_priors(layout: &str) -> usize {
    match layout {
        "forced_coordination" => 5,
        "counter_circuit" => 6,
        _ => 4,
    }
}

/// Initial learning rate and the factor it decays by over training.
pub fn layout_learning_rate(layout: &str) -> (f64, f64) {
    match layout {
        "coordination_ring" => (6e-4, 1.5),
        "forced_coordination" => (8e-4, 2.0),
        "counter_circuit" => (8e-4, 3.0),
        _ => (1e-3, 3.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HiptConfig {
    pub num_priors: usize,
    pub bounds: HorizonBounds,
    pub horizon: u32,
    pub trunk: Vec<usize>,
    pub activation: Activation,
    pub recurrent: RecurrentCell,
    pub influence: InfluenceSchedule,
    pub high_uses_shaped: bool,
    pub ppo: PpoConfig,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub episodes_per_update: usize,
    pub total_env_steps: u64,
    pub shaping: bool,
    pub shaping_anneal_fraction: f64,
    /// Draw the agent's seat uniformly each episode; otherwise seat 0.
    pub randomize_seat: bool,
    /// Evaluate every this many updates (0 disables).
    pub eval_every: u64,
    pub eval_episodes: usize,
    /// Stop once a periodic evaluation reaches this mean return.
    pub stop_return: Option<f64>,
    pub seed: u64,
}

impl Default for HiptConfig {
    fn default() -> Self {
        let total = 5_000_000;
        Self {
            num_priors: 4,
            bounds: HorizonBounds::default(),
            horizon: DEFAULT_HORIZON,
            trunk: vec![128, 128],
            activation: Activation::Tanh,
            recurrent: RecurrentCell::Gated { hidden: 64 },
            influence: InfluenceSchedule { anneal_steps: total, ..InfluenceSchedule::default() },
            high_uses_shaped: true,
            ppo: PpoConfig::default(),
            learning_rate: 1e-3,
            lr_decay: 3.0,
            episodes_per_update: 4,
            total_env_steps: total,
            shaping: true,
            shaping_anneal_fraction: 0.5,
            randomize_seat: true,
            eval_every: 0,
            eval_episodes: 2,
            stop_return: None,
            seed: 0,
        }
    }
}

impl HiptConfig {
    /// Defaults for a bundled layout, with κ annealed over the whole budget.
    pub fn for_layout(layout: &str, total_env_steps: u64) -> Self {
        let (learning_rate, lr_decay) = layout_learning_rate(layout);
        Self {
            num_priors: default_num_priors(layout),
            learning_rate,
            lr_decay,
            total_env_steps,
            influence: InfluenceSchedule { anneal_steps: total_env_steps, ..InfluenceSchedule::default() },
            ..Self::default()
        }
    }

    pub fn network_spec(&self, layout: &Layout) -> NetworkSpec {
        NetworkSpec {
            input_dim: observation_len(layout),
            trunk: self.trunk.clone(),
            activation: self.activation,
            recurrent: self.recurrent,
            num_priors: self.num_priors,
            num_actions: NUM_ACTIONS,
        }
    }

    pub fn updates(&self) -> u64 {
        let per = self.episodes_per_update as u64 * self.horizon as u64;
        self.total_env_steps.div_ceil(per.max(1)).max(1)
    }

    fn optimizer_steps(&self) -> u64 {
        let high = self.horizon.div_ceil(self.bounds.p_min.max(1)) as usize;
        let samples = self.episodes_per_update * (self.horizon as usize + high);
        self.updates() * samples.div_ceil(self.ppo.minibatch_size).max(1) as u64 * self.ppo.epochs as u64
    }

    pub fn validate(&self) -> Result<(), HiptError> {
        if self.num_priors == 0 || self.episodes_per_update == 0 {
            return Err(HiptError::InvalidConfig("num_priors and episodes_per_update must be positive".into()));
        }
        self.bounds.validate(self.horizon)?;
        self.influence.validate()?;
        self.ppo.validate()?;
        Ok(())
    }
}

/// Training state persisted next to the model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiptSidecar {
    pub num_priors: usize,
    pub p_min: u32,
    pub p_max: u32,
    pub influence: InfluenceSchedule,
    pub kappa: f64,
    pub env_steps: u64,
    pub updates: u64,
}

pub fn save_hipt_checkpoint(dir: &Path, name: &str, agent: &HiptAgent, sidecar: &HiptSidecar) -> Result<(), HiptError> {
    std::fs::create_dir_all(dir)?;
    save_model(&dir.join(format!("{name}.model")), agent.spec(), &agent.params)?;
    let json = serde_json::to_string_pretty(sidecar).map_err(|e| HiptError::Checkpoint(e.to_string()))?;
    std::fs::write(dir.join(format!("{name}.json")), json)?;
    Ok(())
}

pub fn load_hipt_checkpoint(dir: &Path, name: &str) -> Result<(HiptAgent, HiptSidecar), HiptError> {
    let (spec, params) = load_model(&dir.join(format!("{name}.model")))?;
    let text = std::fs::read_to_string(dir.join(format!("{name}.json")))?;
    let sidecar: HiptSidecar = serde_json::from_str(&text).map_err(|e| HiptError::Checkpoint(e.to_string()))?;
    if sidecar.num_priors != spec.num_priors {
        return Err(HiptError::Checkpoint("sidecar prior count disagrees with model".into()));
    }
    let bounds = HorizonBounds { p_min: sidecar.p_min, p_max: sidecar.p_max };
    Ok((HiptAgent::new(spec, params, bounds)?, sidecar))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiptProgress {
    pub update: u64,
    pub env_steps: u64,
    pub kappa: f64,
    pub train_return: f64,
    pub mean_influence: f64,
    pub eval_return: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct HiptRun {
    pub agent: HiptAgent,
    pub history: Vec<HiptProgress>,
    pub env_steps: u64,
    pub updates: u64,
    /// How often each population entry was drawn as a partner.
    pub partner_counts: Vec<u64>,
}

impl HiptRun {
    pub fn sidecar(&self, influence: &InfluenceSchedule) -> HiptSidecar {
        HiptSidecar {
            num_priors: self.agent.num_priors(),
            p_min: self.agent.bounds.p_min,
            p_max: self.agent.bounds.p_max,
            influence: *influence,
            kappa: influence.kappa(self.env_steps),
            env_steps: self.env_steps,
            updates: self.updates,
        }
    }
}

/// Mean return of the agent with every full-tier member of `population`,
/// both seats.
pub fn evaluate_vs_full_tier(
    agent: &HiptAgent,
    population: &PartnerPopulation,
    layout: &Layout,
    horizon: u32,
    episodes: usize,
    seed: u64,
) -> Result<f64, HiptError> {
    let mut returns = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..population.len() {
        let mut me = agent.policy();
        let mut partner = population.policy(i, Tier::Full);
        let stats = evaluate_pair(&mut me, &mut partner, layout, horizon, episodes, rng.random())?;
        returns.extend(stats.returns);
    }
    Ok(mean(&returns))
}

/// Alternate batches of Algorithm-1 rollouts against uniformly drawn
/// population entries with one summed bi-level PPO update.
pub fn train_hipt(
    population: &PartnerPopulation,
    layout: &Layout,
    config: &HiptConfig,
    eval_population: Option<&PartnerPopulation>,
    mut metrics: Option<&mut MetricsLog>,
) -> Result<HiptRun, HiptError> {
    config.validate()?;
    if population.is_empty() {
        return Err(HiptError::EmptyPopulation);
    }
    let spec = config.network_spec(layout);
    if spec.input_dim != population.spec.input_dim {
        return Err(HiptError::InvalidConfig("population was trained on a different layout".into()));
    }
    let mut agent = HiptAgent::init(spec, config.seed, config.bounds)?;
    let net = agent.network().clone();
    let mut adam = AdamState::new(agent.params.len());
    let schedule =
        LrSchedule { start: config.learning_rate, decay: config.lr_decay, total_updates: config.optimizer_steps() };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x4849_5054);
    let entries = population.entries();
    let mut partners: Vec<NetworkPolicy> = entries.iter().map(|&(i, t)| population.policy(i, t)).collect();
    let mut partner_counts = vec![0u64; entries.len()];
    let base_shaping = if config.shaping { ShapingConfig::for_layout(layout) } else { ShapingConfig::disabled() };
    let mut scalers = [RewardScaler::new(config.ppo.gamma), RewardScaler::new(config.ppo.gamma)];
    let total_updates = config.updates();
    let mut env_steps = 0u64;
    let mut history = Vec::new();
    let mut updates = 0u64;

    while updates < total_updates {
        let progress = updates as f64 / total_updates as f64;
        let kappa = config.influence.kappa(env_steps);
        let settings = RolloutSettings {
            horizon: config.horizon,
            shaping: base_shaping.with_scale(shaping_factor(progress, config.shaping_anneal_fraction)),
            kappa,
            alpha: config.influence.alpha,
            high_uses_shaped: config.high_uses_shaped,
        };
        let mut batch = PpoBatch::default();
        let mut returns = Vec::with_capacity(config.episodes_per_update);
        let mut influence_sum = 0.0;
        let mut influence_n = 0usize;
        let mut high_return = 0.0;
        for _ in 0..config.episodes_per_update {
            let k = sample_partner(&mut rng, entries.len());
            partner_counts[k] += 1;
            let seat = if config.randomize_seat { rng.random_range(0..2) } else { 0 };
            let mut ep = rollout_episode(&agent, &mut partners[k], layout, &settings, seat, &mut rng)?;
            returns.push(ep.env_return);
            influence_sum += ep.influence.iter().sum::<f64>();
            influence_n += ep.influence.len();
            high_return += ep.high.total_reward();
            if config.ppo.scale_rewards {
                for (buf, scaler) in [&mut ep.low, &mut ep.high].into_iter().zip(scalers.iter_mut()) {
                    for t in &mut buf.transitions {
                        t.reward = scaler.scale(t.reward);
                    }
                    scaler.end_episode();
                }
            }
            batch.push_buffer(&ep.low, 0.0, &config.ppo)?;
            batch.push_buffer(&ep.high, 0.0, &config.ppo)?;
            env_steps += config.horizon as u64;
        }
        let diag =
            ppo_update(&net, &mut agent.params, &mut adam, &schedule, &batch, &config.ppo, progress, None, &mut rng)
                .map_err(|e| match e {
                    RlError::Diverged(why) => HiptError::Diverged { update: updates, why },
                    other => other.into(),
                })?;
        updates += 1;
        let train_return = mean(&returns);
        if let Some(log) = metrics.as_deref_mut() {
            log.write(&MetricsRecord::new(updates, Level::Low, &diag.low, train_return, env_steps).with_tag("hipt"))?;
            if let Some(h) = &diag.high {
                let r_h = high_return / config.episodes_per_update as f64;
                log.write(&MetricsRecord::new(updates, Level::High, h, r_h, env_steps).with_tag("hipt"))?;
            }
        }
        let mut eval_return = None;
        if config.eval_every > 0 && (updates.is_multiple_of(config.eval_every) || updates == total_updates) {
            if let Some(pop) = eval_population {
                let r = evaluate_vs_full_tier(&agent, pop, layout, config.horizon, config.eval_episodes, updates)?;
                info!("hipt update {updates} steps {env_steps} kappa {kappa:.1} eval {r:.1}");
                eval_return = Some(r);
            }
        }
        history.push(HiptProgress {
            update: updates,
            env_steps,
            kappa,
            train_return,
            mean_influence: influence_sum / influence_n.max(1) as f64,
            eval_return,
        });
        if let (Some(target), Some(r)) = (config.stop_return, eval_return) {
            if r >= target {
                break;
            }
        }
    }
    Ok(HiptRun { agent, history, env_steps, updates, partner_counts })
}
