//! The hierarchical agent: a high-level head choosing a sub-policy prior
//! `z` for a random number of steps, a low-level head acting under `z`,
//! and an influence reward that pushes the sub-policies apart.

mod agent;
mod reward;
mod rollout;
mod train;

use thiserror::Error;

use crate::approximator::ApproxError;
use crate::env::StepError;
use crate::eval::EvalError;
use crate::policy::PolicyError;
use crate::rl_core::RlError;

pub use agent::{HiptAgent, HiptHeads, HiptPolicy, HorizonBounds};
pub use reward::{anneal, high_level_reward, influence_reward, marginal_low_policy, InfluenceSchedule};
pub use rollout::{rollout_episode, sample_partner, HiptEpisode, RolloutSettings};
pub use train::{
    default_num_priors, evaluate_vs_full_tier, layout_learning_rate, load_hipt_checkpoint, save_hipt_checkpoint,
    train_hipt, HiptConfig, HiptProgress, HiptRun, HiptSidecar,
};

#[derive(Debug, Error)]
pub enum HiptError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("segment of length {p} got {env} environment and {influence} influence rewards")]
    SegmentLength { p: usize, env: usize, influence: usize },
    #[error("partner population is empty")]
    EmptyPopulation,
    #[error("update {update} diverged: {why}")]
    Diverged { update: u64, why: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
