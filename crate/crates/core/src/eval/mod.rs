//! Evaluation harness: pairings, skill-tiered suites, behavior cloning and reports.

mod bc;
mod pair;
mod report;
mod suite;

use thiserror::Error;

use crate::approximator::ApproxError;
use crate::env::{EpisodeError, ReplayError};

pub use bc::{record_episodes, records_digest, split_by_episode, train_bc, BcConfig, BcDataset, BcModel};
pub use pair::{evaluate_pair, evaluate_pair_seats, self_play_return, PairStats};
pub use report::{emit_report, read_report_csv, write_report, ReportFormat, ReportRow, REPORT_COLUMNS};
pub use suite::{evaluate_vs_population, EvalCell, EvalOutcome, EvalSuite, DEFAULT_EVAL_EPISODES};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("at least one episode is required")]
    NoEpisodes,
    #[error("held-out population shares training seeds {0:?}")]
    SeedOverlap(Vec<u64>),
    #[error("train and held-out splits share episodes {0:?}")]
    EpisodeOverlap(Vec<String>),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("report has no rows")]
    EmptyReport,
    #[error("invalid evaluation config: {0}")]
    InvalidSuite(String),
    #[error("report: {0}")]
    Report(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
}
