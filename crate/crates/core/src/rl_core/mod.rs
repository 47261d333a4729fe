//! PPO machinery shared by both hierarchy levels.

mod bandit;
mod buffer;
mod gae;
mod losses;
mod metrics;
mod ppo;

use thiserror::Error;

use crate::approximator::ApproxError;

pub use bandit::{train_bandit, BanditReport};
pub use buffer::{Level, RewardScaler, TrajectoryBuffer, Transition};
pub use gae::{compute_gae, normalize};
pub use losses::{approx_kl, entropy_bonus, ppo_clip_loss, value_loss, Surrogate};
pub use metrics::{read_metrics, MetricsLog, MetricsRecord};
pub use ppo::{ppo_update, LevelDiagnostics, PpoBatch, PpoConfig, PpoSample, Regularizer, UpdateDiagnostics};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RlError {
    #[error("vector lengths differ")]
    LengthMismatch,
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("invalid transition: {0}")]
    InvalidTransition(String),
    #[error("empty buffer")]
    EmptyBuffer,
    #[error("invalid PPO config: {0}")]
    InvalidConfig(String),
    #[error("update diverged: {0}")]
    Diverged(String),
    #[error(transparent)]
    Approx(#[from] ApproxError),
}
