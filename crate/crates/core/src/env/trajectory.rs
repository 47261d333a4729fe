//! JSONL trajectory logs and digest-checked replay.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::engine::{reset, step, StepError};
use super::layout::Layout;
use super::state::{Event, JointAction, ShapedReward, ShapingConfig, StepOutcome, WorldState};

/// One line of a trajectory log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub episode: String,
    pub layout: String,
    /// Tick at which `joint_action` was taken.
    pub tick: u32,
    pub joint_action: JointAction,
    pub sparse_reward: u32,
    pub shaped: [ShapedReward; 2],
    pub events: Vec<Event>,
    /// Digest of the state after the step.
    pub state_digest: String,
}

impl TrajectoryRecord {
    pub fn from_outcome(episode: &str, layout: &str, tick: u32, joint: JointAction, outcome: &StepOutcome) -> Self {
        Self {
            episode: episode.to_string(),
            layout: layout.to_string(),
            tick,
            joint_action: joint,
            sparse_reward: outcome.sparse_reward,
            shaped: outcome.shaped_rewards,
            events: outcome.events.clone(),
            state_digest: outcome.next_state.digest(),
        }
    }

    pub fn deliveries(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, Event::SoupDelivered { .. })).count()
    }
}

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[TrajectoryRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<TrajectoryRecord>, TrajectoryError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|source| TrajectoryError::Parse { line: i + 1, source })?);
    }
    Ok(records)
}

/// Split records into episodes, preserving order of first appearance.
pub fn group_episodes(records: &[TrajectoryRecord]) -> Vec<(String, Vec<TrajectoryRecord>)> {
    let mut out: Vec<(String, Vec<TrajectoryRecord>)> = Vec::new();
    for r in records {
        match out.iter_mut().find(|(id, _)| *id == r.episode) {
            Some((_, v)) => v.push(r.clone()),
            None => out.push((r.episode.clone(), vec![r.clone()])),
        }
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("tick {tick}: digest mismatch (logged {logged}, simulated {simulated})")]
    DigestMismatch { tick: u32, logged: String, simulated: String },
    #[error("tick {tick}: logged tick does not follow the previous record")]
    TickGap { tick: u32 },
    #[error("tick {tick}: logged reward {logged}, simulated {simulated}")]
    RewardMismatch { tick: u32, logged: u32, simulated: u32 },
    #[error(transparent)]
    Step(#[from] StepError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplaySummary {
    pub steps: usize,
    pub score: u32,
    pub final_state: WorldState,
}

/// Re-simulate one episode from reset and check every logged digest.
pub fn replay(records: &[TrajectoryRecord], layout: &Layout, horizon: u32) -> Result<ReplaySummary, ReplayError> {
    let mut state = reset(layout);
    for r in records {
        if r.tick != state.tick {
            return Err(ReplayError::TickGap { tick: r.tick });
        }
        // Shaping never changes the state, only the logged shaped components.
        let outcome = step(&state, r.joint_action, layout, &ShapingConfig::disabled(), horizon)?;
        if outcome.sparse_reward != r.sparse_reward {
            return Err(ReplayError::RewardMismatch {
                tick: r.tick,
                logged: r.sparse_reward,
                simulated: outcome.sparse_reward,
            });
        }
        let digest = outcome.next_state.digest();
        if digest != r.state_digest {
            return Err(ReplayError::DigestMismatch {
                tick: r.tick,
                logged: r.state_digest.clone(),
                simulated: digest,
            });
        }
        state = outcome.next_state;
    }
    Ok(ReplaySummary { steps: records.len(), score: state.score, final_state: state })
}
