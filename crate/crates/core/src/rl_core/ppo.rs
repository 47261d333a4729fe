use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{Level, TrajectoryBuffer};
use super::gae::normalize;
use super::losses::{approx_kl, ppo_clip_loss, value_loss};
use super::RlError;
use crate::approximator::{
    adam_update, AdamState, Gradient, HeadCotangents, LrSchedule, Network, ParamStore, RecurrentState,
};
use crate::math::{entropy, entropy_grad_logits, softmax, softmax_backward};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub value_coef: f64,
    /// Entropy coefficient at the start of training.
    pub entropy_coef: f64,
    /// Entropy coefficient reached at the end of training.
    pub entropy_coef_final: f64,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub normalize_advantages: bool,
    /// Global gradient-norm cap; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
    /// Scale rewards by a running return std before computing advantages.
    pub scale_rewards: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.05,
            value_coef: 0.5,
            entropy_coef: 0.01,
            entropy_coef_final: 0.0,
            minibatch_size: 512,
            epochs: 4,
            normalize_advantages: true,
            max_grad_norm: Some(0.5),
            scale_rewards: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let ok = (0.0..=1.0).contains(&self.gamma)
            && (0.0..=1.0).contains(&self.lambda)
            && self.clip > 0.0
            && self.value_coef >= 0.0
            && self.entropy_coef >= 0.0
            && self.entropy_coef_final >= 0.0
            && self.minibatch_size > 0
            && self.epochs > 0
            && self.max_grad_norm.is_none_or(|g| g > 0.0);
        if ok {
            Ok(())
        } else {
            Err(RlError::InvalidConfig(format!("{self:?}")))
        }
    }

    /// Entropy coefficient after `progress` ∈ [0, 1] of training.
    pub fn entropy_coef_at(&self, progress: f64) -> f64 {
        let f = progress.clamp(0.0, 1.0);
        self.entropy_coef + (self.entropy_coef_final - self.entropy_coef) * f
    }
}

/// One training sample with its advantage and return target.
#[derive(Clone, Debug, PartialEq)]
pub struct PpoSample {
    pub observation: Vec<f64>,
    pub hidden: RecurrentState,
    pub prior: Option<usize>,
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub return_target: f64,
}

/// Samples for both levels, updated jointly.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PpoBatch {
    pub low: Vec<PpoSample>,
    pub high: Vec<PpoSample>,
}

impl PpoBatch {
    pub fn len(&self) -> usize {
        self.low.len() + self.high.len()
    }

    pub fn is_empty(&self) -> bool {
        self.low.is_empty() && self.high.is_empty()
    }

    /// Run GAE over a buffer and append its samples to the matching level.
    pub fn push_buffer(
        &mut self,
        buffer: &TrajectoryBuffer,
        bootstrap: f64,
        config: &PpoConfig,
    ) -> Result<(), RlError> {
        let (adv, ret) = buffer.compute_gae(bootstrap, config.gamma, config.lambda)?;
        let dest = match buffer.level {
            Level::Low => &mut self.low,
            Level::High => &mut self.high,
        };
        for ((t, a), r) in buffer.transitions.iter().zip(adv).zip(ret) {
            dest.push(PpoSample {
                observation: t.observation.clone(),
                hidden: t.hidden.clone(),
                prior: t.prior,
                action: t.action,
                old_log_prob: t.log_prob,
                advantage: a,
                return_target: r,
            });
        }
        Ok(())
    }
}

/// Extra policy term on low-level samples, minimized alongside the PPO loss.
/// It only applies to samples whose probability ratio is still inside the
/// clip range, so it moves the policy no further per update than PPO does.
pub trait Regularizer {
    /// Loss for low-level sample `index` given its current action
    /// probabilities, and the gradient of that loss with respect to them.
    fn loss_and_grad(&self, index: usize, probs: &[f64]) -> (f64, Vec<f64>);
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    /// Negated surrogate.
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub regularizer: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    pub low: LevelDiagnostics,
    pub high: Option<LevelDiagnostics>,
    pub grad_norm: f64,
    pub learning_rate: f64,
    pub optimizer_steps: usize,
}

#[derive(Default)]
struct Accum {
    sums: LevelDiagnostics,
    passes: usize,
}

impl Accum {
    fn finish(self, samples: usize) -> LevelDiagnostics {
        let k = self.passes.max(1) as f64;
        LevelDiagnostics {
            policy_loss: self.sums.policy_loss / k,
            value_loss: self.sums.value_loss / k,
            entropy: self.sums.entropy / k,
            regularizer: self.sums.regularizer / k,
            clip_fraction: self.sums.clip_fraction / k,
            approx_kl: self.sums.approx_kl / k,
            samples,
        }
    }
}

struct Ctx<'a> {
    net: &'a Network,
    params: &'a ParamStore,
    config: &'a PpoConfig,
    entropy_coef: f64,
}

/// Forward, loss and backward for one level of one minibatch.
fn level_pass(
    ctx: &Ctx,
    samples: &[PpoSample],
    indices: &[usize],
    level: Level,
    regularizer: Option<&dyn Regularizer>,
    grad: &mut Gradient,
    acc: &mut Accum,
) -> Result<f64, RlError> {
    if indices.is_empty() {
        return Ok(0.0);
    }
    let n = indices.len() as f64;
    let mut caches = Vec::with_capacity(indices.len());
    let mut probs = Vec::with_capacity(indices.len());
    let mut new_lp = Vec::with_capacity(indices.len());
    let mut old_lp = Vec::with_capacity(indices.len());
    let mut values = Vec::with_capacity(indices.len());
    let mut targets = Vec::with_capacity(indices.len());
    let mut advs = Vec::with_capacity(indices.len());
    for &i in indices {
        let s = &samples[i];
        let prior = match level {
            Level::Low => Some(s.prior.unwrap_or(0)),
            Level::High => None,
        };
        let (out, _, cache) = ctx.net.forward(ctx.params, &s.observation, &s.hidden, prior)?;
        let (p, v) = match level {
            Level::Low => (softmax(out.low_logits.as_deref().expect("prior supplied")), out.value_low),
            Level::High => (softmax(&out.high_logits), out.value_high),
        };
        new_lp.push(p[s.action].max(1e-300).ln());
        old_lp.push(s.old_log_prob);
        values.push(v);
        targets.push(s.return_target);
        advs.push(s.advantage);
        probs.push(p);
        caches.push(cache);
    }
    if ctx.config.normalize_advantages && advs.len() > 1 {
        normalize(&mut advs);
    }
    let surrogate = ppo_clip_loss(&new_lp, &old_lp, &advs, ctx.config.clip)?;
    let (vloss, vgrad) = value_loss(&values, &targets)?;
    let mean_entropy = probs.iter().map(|p| entropy(p)).sum::<f64>() / n;

    let mut reg_total = 0.0;
    let mut reg_grads = Vec::new();
    if let (Level::Low, Some(reg)) = (level, regularizer) {
        let eps = ctx.config.clip;
        for (k, &i) in indices.iter().enumerate() {
            let ratio = (new_lp[k] - old_lp[k]).exp();
            if (1.0 - eps..=1.0 + eps).contains(&ratio) {
                let (l, g) = reg.loss_and_grad(i, &probs[k]);
                reg_total += l;
                reg_grads.push(Some(g));
            } else {
                reg_grads.push(None);
            }
        }
    }
    let reg_mean = reg_total / n;
    let loss = -surrogate.value + ctx.config.value_coef * vloss - ctx.entropy_coef * mean_entropy + reg_mean;
    if !loss.is_finite() {
        return Err(RlError::Diverged(format!("non-finite {level:?} loss")));
    }

    for (k, cache) in caches.iter().enumerate() {
        let p = &probs[k];
        let a = samples[indices[k]].action;
        // d(−surrogate)/d(logits) via d(log p_a)/d(logits) = onehot(a) − p.
        let gs = -surrogate.grad_new_log_probs[k];
        let mut d_logits: Vec<f64> = p.iter().enumerate().map(|(j, &pj)| gs * (f64::from(j == a) - pj)).collect();
        let eg = entropy_grad_logits(p);
        for (d, e) in d_logits.iter_mut().zip(&eg) {
            *d -= ctx.entropy_coef * e / n;
        }
        if let Some(Some(g)) = reg_grads.get(k) {
            let back = softmax_backward(p, g);
            for (d, b) in d_logits.iter_mut().zip(&back) {
                *d += b / n;
            }
        }
        let dv = ctx.config.value_coef * vgrad[k];
        let cot = match level {
            Level::Low => HeadCotangents { low_logits: Some(d_logits), value_low: dv, ..Default::default() },
            Level::High => HeadCotangents { high_logits: Some(d_logits), value_high: dv, ..Default::default() },
        };
        ctx.net.backward(ctx.params, cache, &cot, grad)?;
    }

    acc.sums.policy_loss += -surrogate.value;
    acc.sums.value_loss += vloss;
    acc.sums.entropy += mean_entropy;
    acc.sums.regularizer += reg_mean;
    acc.sums.clip_fraction += surrogate.clip_fraction;
    acc.sums.approx_kl += approx_kl(&new_lp, &old_lp);
    acc.passes += 1;
    Ok(loss)
}

/// Minibatched multi-epoch clipped-PPO update over the summed objective of
/// both levels. On divergence the parameters and optimizer state are
/// restored to their values at entry.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update<R: Rng + ?Sized>(
    net: &Network,
    params: &mut ParamStore,
    adam: &mut AdamState,
    schedule: &LrSchedule,
    batch: &PpoBatch,
    config: &PpoConfig,
    progress: f64,
    regularizer: Option<&dyn Regularizer>,
    rng: &mut R,
) -> Result<UpdateDiagnostics, RlError> {
    config.validate()?;
    if batch.is_empty() {
        return Err(RlError::EmptyBuffer);
    }
    let saved_params = params.clone();
    let saved_adam = adam.clone();
    let result = run_update(net, params, adam, schedule, batch, config, progress, regularizer, rng);
    if result.is_err() {
        *params = saved_params;
        *adam = saved_adam;
    }
    result
}

#[allow(clippy::too_many_arguments)]
fn run_update<R: Rng + ?Sized>(
    net: &Network,
    params: &mut ParamStore,
    adam: &mut AdamState,
    schedule: &LrSchedule,
    batch: &PpoBatch,
    config: &PpoConfig,
    progress: f64,
    regularizer: Option<&dyn Regularizer>,
    rng: &mut R,
) -> Result<UpdateDiagnostics, RlError> {
    let entropy_coef = config.entropy_coef_at(progress);
    let k = batch.len().div_ceil(config.minibatch_size).max(1);
    let mut low_idx: Vec<usize> = (0..batch.low.len()).collect();
    let mut high_idx: Vec<usize> = (0..batch.high.len()).collect();
    let mut low_acc = Accum::default();
    let mut high_acc = Accum::default();
    let mut grad = Gradient::zeros(params.len());
    let mut diag = UpdateDiagnostics::default();
    let mut norm_sum = 0.0;
    for _ in 0..config.epochs {
        low_idx.shuffle(rng);
        high_idx.shuffle(rng);
        for m in 0..k {
            let lo = chunk(&low_idx, k, m);
            let hi = chunk(&high_idx, k, m);
            if lo.is_empty() && hi.is_empty() {
                continue;
            }
            grad.fill_zero();
            let ctx = Ctx { net, params, config, entropy_coef };
            level_pass(&ctx, &batch.low, lo, Level::Low, regularizer, &mut grad, &mut low_acc)?;
            level_pass(&ctx, &batch.high, hi, Level::High, None, &mut grad, &mut high_acc)?;
            if !grad.is_finite() {
                return Err(RlError::Diverged("non-finite gradient".into()));
            }
            let norm = grad.norm();
            norm_sum += norm;
            if let Some(cap) = config.max_grad_norm {
                if norm > cap {
                    grad.scale(cap / norm);
                }
            }
            diag.learning_rate = adam_update(params, &grad, adam, schedule)?;
            diag.optimizer_steps += 1;
        }
    }
    if params.as_slice().iter().any(|p| !p.is_finite()) {
        return Err(RlError::Diverged("non-finite parameters".into()));
    }
    diag.grad_norm = norm_sum / diag.optimizer_steps.max(1) as f64;
    diag.low = low_acc.finish(batch.low.len());
    if !batch.high.is_empty() {
        diag.high = Some(high_acc.finish(batch.high.len()));
    }
    Ok(diag)
}

/// The `m`-th of `k` nearly equal contiguous chunks.
fn chunk(xs: &[usize], k: usize, m: usize) -> &[usize] {
    let start = xs.len() * m / k;
    let end = xs.len() * (m + 1) / k;
    &xs[start..end]
}
