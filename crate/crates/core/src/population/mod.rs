//! Diverse partner populations: self-play PPO with a Jensen-Shannon
//! diversity bonus, skill-tier checkpoints, and crossplay analysis.

mod archive;
mod crossplay;
mod jsd;
mod selfplay;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approximator::{Activation, LrSchedule, NetworkSpec, ParamStore, RecurrentCell};
use crate::env::{observation_len, shaping_factor, Layout, ShapingConfig, DEFAULT_HORIZON, NUM_ACTIONS};
use crate::eval::{self_play_return, EvalError};
use crate::policy::NetworkPolicy;
use crate::rl_core::{Level, MetricsLog, MetricsRecord, PpoConfig, RlError};

pub use archive::{load_population, save_population, ARCHIVE_MANIFEST};
pub use crossplay::{
    classify_play_styles, crossplay_matrix, write_crossplay_csv, write_heatmap_pgm, CrossplayMatrix, PlayStyles,
};
pub use jsd::{jsd_grad, jsd_state, jsd_term, mixture};
pub use selfplay::{SelfPlayBatch, SelfPlayTrainer};

#[derive(Debug, Error)]
pub enum PopulationError {
    #[error("need at least 2 members, got {0}")]
    TooFewMembers(usize),
    #[error("not a probability distribution: {0:?}")]
    InvalidDistribution(Vec<f64>),
    #[error("slot {slot} diverged after {attempts} attempts: {source}")]
    Diverged { slot: usize, attempts: u32, source: RlError },
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("empty crossplay matrix")]
    EmptyMatrix,
    #[error("archive: {0}")]
    Archive(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Full,
    Mid,
    Random,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Full, Tier::Mid, Tier::Random];

    pub fn name(self) -> &'static str {
        match self {
            Tier::Full => "full",
            Tier::Mid => "mid",
            Tier::Random => "random",
        }
    }
}

/// A parameter snapshot with its measured self-play return.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointRecord {
    pub update: u64,
    pub env_steps: u64,
    pub params: ParamStore,
    /// Mean sparse self-play return, shaping off.
    pub j_sp: f64,
    pub j_sp_std: f64,
    pub episodes: usize,
}

/// Three skill tiers of one trained agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationMember {
    pub seed: u64,
    #[serde(skip)]
    pub full: ParamStore,
    #[serde(skip)]
    pub mid: ParamStore,
    #[serde(skip)]
    pub random: ParamStore,
    pub j_sp_full: f64,
    pub j_sp_mid: f64,
    pub mid_update: u64,
    pub full_update: u64,
    /// Whether the mid checkpoint landed in the accepted band.
    pub mid_in_band: bool,
}

impl PopulationMember {
    pub fn params(&self, tier: Tier) -> &ParamStore {
        match tier {
            Tier::Full => &self.full,
            Tier::Mid => &self.mid,
            Tier::Random => &self.random,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartnerPopulation {
    pub layout: String,
    pub spec: NetworkSpec,
    pub members: Vec<PopulationMember>,
}

impl PartnerPopulation {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// All `3N` (member, tier) entries, member-major.
    pub fn entries(&self) -> Vec<(usize, Tier)> {
        (0..self.members.len()).flat_map(|i| Tier::ALL.into_iter().map(move |t| (i, t))).collect()
    }

    pub fn policy(&self, member: usize, tier: Tier) -> NetworkPolicy {
        NetworkPolicy::from_spec(self.spec.clone(), self.members[member].params(tier).clone())
            .expect("population spec matches its parameters")
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.members.iter().map(|m| m.seed).collect()
    }
}

/// Bounds on an accepted mid-tier checkpoint, as fractions of the full return.
pub const MID_BAND: (f64, f64) = (0.35, 0.65);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    pub size: usize,
    pub horizon: u32,
    pub trunk: Vec<usize>,
    pub activation: Activation,
    pub recurrent: RecurrentCell,
    pub ppo: PpoConfig,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub episodes_per_update: usize,
    /// Training budget per member, in environment steps.
    pub env_steps_per_member: u64,
    pub jsd_coef: f64,
    /// Anneal the JSD weight linearly to zero over the budget.
    pub jsd_anneal: bool,
    pub shaping: bool,
    /// Fraction of the budget over which shaped rewards fade to zero.
    pub shaping_anneal_fraction: f64,
    /// Shaped penalty when the other seat delivers. One network plays both
    /// seats, so a nonzero value cancels the delivery reward for one of them.
    pub delivery_penalty: f64,
    pub checkpoint_every: u64,
    pub checkpoint_episodes: usize,
    pub final_eval_episodes: usize,
    /// Stop a member early once a checkpoint reaches this self-play return.
    pub stop_return: Option<f64>,
    pub seed: u64,
    /// Restarts per slot, shared by divergence and stall restarts.
    pub max_retries: u32,
    pub stall: Option<StallRule>,
}

/// Restart a member with a fresh seed when, after `at_fraction` of its
/// budget, no checkpoint has reached `min_return`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StallRule {
    pub at_fraction: f64,
    pub min_return: f64,
}

impl Default for StallRule {
    fn default() -> Self {
        Self { at_fraction: 0.5, min_return: 20.0 }
    }
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            size: 4,
            horizon: DEFAULT_HORIZON,
            trunk: vec![64, 64],
            activation: Activation::Tanh,
            recurrent: RecurrentCell::None,
            ppo: PpoConfig::default(),
            learning_rate: 1e-3,
            lr_decay: 3.0,
            episodes_per_update: 4,
            env_steps_per_member: 1_000_000,
            jsd_coef: 0.1,
            jsd_anneal: true,
            shaping: true,
            shaping_anneal_fraction: 0.5,
            delivery_penalty: 0.0,
            checkpoint_every: 2,
            checkpoint_episodes: 10,
            final_eval_episodes: 20,
            stop_return: None,
            seed: 0,
            max_retries: 8,
            stall: Some(StallRule::default()),
        }
    }
}

impl PopulationConfig {
    /// Unannealed shaping for self-play rollouts on `layout`.
    pub fn self_play_shaping(&self, layout: &Layout) -> ShapingConfig {
        let base = if self.shaping { ShapingConfig::for_layout(layout) } else { ShapingConfig::disabled() };
        ShapingConfig { delivery_penalty: self.delivery_penalty, ..base }
    }

    pub fn network_spec(&self, layout: &Layout) -> NetworkSpec {
        NetworkSpec {
            input_dim: observation_len(layout),
            trunk: self.trunk.clone(),
            activation: self.activation,
            recurrent: self.recurrent,
            num_priors: 1,
            num_actions: NUM_ACTIONS,
        }
    }

    pub fn updates_per_member(&self) -> u64 {
        let per_update = self.episodes_per_update as u64 * self.horizon as u64;
        self.env_steps_per_member.div_ceil(per_update.max(1)).max(1)
    }

    /// Total optimizer steps a member takes, for the learning-rate schedule.
    pub fn optimizer_steps(&self) -> u64 {
        let samples = 2 * self.episodes_per_update * self.horizon as usize;
        let minibatches = samples.div_ceil(self.ppo.minibatch_size).max(1) as u64;
        self.updates_per_member() * minibatches * self.ppo.epochs as u64
    }

    pub fn member_seed(&self, slot: usize, attempt: u32) -> u64 {
        self.seed.wrapping_mul(1_000_003).wrapping_add(slot as u64).wrapping_add(attempt as u64 * 0x9e37_79b9)
    }
}

/// Everything a population run produced.
#[derive(Clone, Debug)]
pub struct PopulationRun {
    pub population: PartnerPopulation,
    /// Per member: (update, env steps, J_SP) at each checkpoint.
    pub histories: Vec<Vec<(u64, u64, f64)>>,
    pub env_steps: Vec<u64>,
}

/// Pick the checkpoint nearest half of `full`. Returns its index and
/// whether it lies in [`MID_BAND`].
pub fn select_mid_checkpoint(checkpoints: &[CheckpointRecord], full: f64) -> Option<(usize, bool)> {
    let target = 0.5 * full;
    let (idx, rec) = checkpoints
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.j_sp - target).abs().total_cmp(&(b.1.j_sp - target).abs()))?;
    let in_band = full > 0.0 && rec.j_sp >= MID_BAND.0 * full && rec.j_sp <= MID_BAND.1 * full;
    Some((idx, in_band))
}

struct Slot {
    trainer: SelfPlayTrainer,
    init: ParamStore,
    seed: u64,
    attempts: u32,
    checkpoints: Vec<CheckpointRecord>,
    done: bool,
}

fn new_slot(config: &PopulationConfig, spec: &NetworkSpec, slot: usize, attempt: u32) -> Result<Slot, RlError> {
    let seed = config.member_seed(slot, attempt);
    let schedule =
        LrSchedule { start: config.learning_rate, decay: config.lr_decay, total_updates: config.optimizer_steps() };
    let trainer = SelfPlayTrainer::new(spec.clone(), seed, schedule, config.ppo.clone())?;
    let init = trainer.params.clone();
    Ok(Slot { trainer, init, seed, attempts: attempt, checkpoints: Vec::new(), done: false })
}

/// A peer as it was after `updates` updates, so a restarted member is
/// compared against peers at its own stage of training.
fn peer_at(slot: &Slot, updates: u64) -> &ParamStore {
    slot.checkpoints.iter().rev().find(|c| c.update <= updates).map_or(&slot.init, |c| &c.params)
}

fn measure(
    spec: &NetworkSpec,
    params: &ParamStore,
    layout: &Layout,
    horizon: u32,
    episodes: usize,
    seed: u64,
) -> Result<(f64, f64), PopulationError> {
    let policy = NetworkPolicy::from_spec(spec.clone(), params.clone()).expect("spec matches");
    let stats = self_play_return(&policy, layout, horizon, episodes, seed)?;
    Ok((stats.mean(), stats.std()))
}

/// Train `config.size` self-play agents round-robin. Each member's loss
/// subtracts `jsd_coef · JSD` computed over its own batch against frozen
/// snapshots of the other members taken at the start of the round.
pub fn train_population(
    layout: &Layout,
    config: &PopulationConfig,
    mut metrics: Option<&mut MetricsLog>,
) -> Result<PopulationRun, PopulationError> {
    if config.size < 2 {
        return Err(PopulationError::TooFewMembers(config.size));
    }
    config.ppo.validate()?;
    let spec = config.network_spec(layout);
    let total_updates = config.updates_per_member();
    let base_shaping = config.self_play_shaping(layout);
    let mut slots: Vec<Slot> = (0..config.size).map(|i| new_slot(config, &spec, i, 0)).collect::<Result<_, _>>()?;
    let mut histories = vec![Vec::new(); config.size];

    while slots.iter().any(|s| !s.done) {
        let snapshot: Vec<(u64, ParamStore)> =
            slots.iter().map(|s| (s.trainer.updates, s.trainer.params.clone())).collect();
        for i in 0..slots.len() {
            if slots[i].done {
                continue;
            }
            let own = slots[i].trainer.updates;
            let progress = slots[i].trainer.updates as f64 / total_updates as f64;
            let shaping = base_shaping.with_scale(shaping_factor(progress, config.shaping_anneal_fraction));
            let jsd_coef = if config.jsd_anneal { config.jsd_coef * (1.0 - progress) } else { config.jsd_coef };
            let peers: Vec<ParamStore> = snapshot
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(j, (updates, params))| if *updates <= own { params } else { peer_at(&slots[j], own) }.clone())
                .collect();
            let peers: Vec<&ParamStore> = peers.iter().collect();
            let slot = &mut slots[i];
            let result = slot
                .trainer
                .collect(layout, config.horizon, &shaping, config.episodes_per_update)
                .and_then(|data| slot.trainer.update(&data, &peers, jsd_coef, progress).map(|d| (d, data)));
            let (diag, data) = match result {
                Ok(v) => v,
                Err(RlError::Diverged(why)) => {
                    let attempt = slot.attempts + 1;
                    if attempt > config.max_retries {
                        return Err(PopulationError::Diverged {
                            slot: i,
                            attempts: attempt,
                            source: RlError::Diverged(why),
                        });
                    }
                    warn!("population slot {i} diverged ({why}); restarting with a new seed");
                    slots[i] = new_slot(config, &spec, i, attempt)?;
                    histories[i].clear();
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let mean_return = crate::math::mean(&data.returns);
            if let Some(log) = metrics.as_deref_mut() {
                let rec = MetricsRecord::new(
                    slot.trainer.updates,
                    Level::Low,
                    &diag.low,
                    mean_return,
                    slot.trainer.env_steps,
                )
                .with_tag(format!("member{i}"));
                log.write(&rec)?;
            }
            let finished = slot.trainer.updates >= total_updates;
            if slot.trainer.updates.is_multiple_of(config.checkpoint_every) || finished {
                let eval_seed = slot.seed ^ slot.trainer.updates.wrapping_mul(0x2545_f491);
                let (j, sd) = measure(
                    &spec,
                    &slot.trainer.params,
                    layout,
                    config.horizon,
                    config.checkpoint_episodes,
                    eval_seed,
                )?;
                info!("member {i} update {} steps {} J_SP {j:.1}", slot.trainer.updates, slot.trainer.env_steps);
                slot.checkpoints.push(CheckpointRecord {
                    update: slot.trainer.updates,
                    env_steps: slot.trainer.env_steps,
                    params: slot.trainer.params.clone(),
                    j_sp: j,
                    j_sp_std: sd,
                    episodes: config.checkpoint_episodes,
                });
                histories[i].push((slot.trainer.updates, slot.trainer.env_steps, j));
                let reached = config.stop_return.is_some_and(|target| j >= target);
                if finished || reached {
                    slot.done = true;
                }
                let stalled = config.stall.is_some_and(|rule| {
                    slot.trainer.updates as f64 >= rule.at_fraction * total_updates as f64
                        && slot.checkpoints.iter().all(|c| c.j_sp < rule.min_return)
                });
                if stalled && slot.attempts < config.max_retries {
                    let attempt = slot.attempts + 1;
                    warn!("population slot {i} stalled below the minimum return; restarting with a new seed");
                    slots[i] = new_slot(config, &spec, i, attempt)?;
                    histories[i].clear();
                }
            }
        }
    }

    let mut members = Vec::with_capacity(config.size);
    let mut env_steps = Vec::with_capacity(config.size);
    for (i, slot) in slots.into_iter().enumerate() {
        let full = slot.trainer.params.clone();
        let (j_full, _) =
            measure(&spec, &full, layout, config.horizon, config.final_eval_episodes, slot.seed ^ 0xf1a1)?;
        let candidates = &slot.checkpoints[..slot.checkpoints.len().saturating_sub(1)];
        let (mid, j_mid, mid_update, in_band) = match select_mid_checkpoint(candidates, j_full) {
            Some((k, band)) => (candidates[k].params.clone(), candidates[k].j_sp, candidates[k].update, band),
            None => (slot.init.clone(), 0.0, 0, false),
        };
        if !in_band {
            warn!("member {i}: no checkpoint within the mid band (J_SP full {j_full:.1}, nearest {j_mid:.1})");
        }
        env_steps.push(slot.trainer.env_steps);
        members.push(PopulationMember {
            seed: slot.seed,
            full,
            mid,
            random: slot.init,
            j_sp_full: j_full,
            j_sp_mid: j_mid,
            mid_update,
            full_update: slot.trainer.updates,
            mid_in_band: in_band,
        });
    }
    Ok(PopulationRun {
        population: PartnerPopulation { layout: layout.name.clone(), spec, members },
        histories,
        env_steps,
    })
}
