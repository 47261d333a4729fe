//! One human, one agent at a time, advanced one tick per call.
//!
//! Rounds follow a blind paired-comparison protocol: two agents are drawn,
//! each plays one episode with the human under a masked label, then the human
//! states a preference of -1 (Partner A) or +1 (Partner B).

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use hipt_core::env::{encode_observation, reset, step, Action, Layout, ShapingConfig, TrajectoryRecord, WorldState};
use hipt_core::policy::{sample_categorical, Policy, SeatView};
use hipt_core::scripted::ScriptedCook;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::BoxedPolicy;
use crate::protocol::ServerMessage;

pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const PREFERENCES_FILE: &str = "preferences.jsonl";
pub const PARTNER_LABELS: [&str; 2] = ["Partner A", "Partner B"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Lobby,
    Playing,
    BetweenEpisodes,
    Preference,
    Done,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{action} is not allowed in phase {phase:?}")]
    WrongPhase { action: &'static str, phase: Phase },
    #[error("preference must be -1 or +1, got {0}")]
    InvalidChoice(i8),
    #[error("agent inference failed: {0}")]
    Inference(String),
    #[error("a session needs at least two agents to compare")]
    TooFewAgents,
    #[error(transparent)]
    Step(#[from] hipt_core::env::StepError),
    #[error("persisting session data: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub session: String,
    pub round: usize,
    /// Unmasked agent ids behind "Partner A" and "Partner B".
    pub agent_a: String,
    pub agent_b: String,
    /// -1 prefers A, +1 prefers B.
    pub choice: i8,
    pub scores: [u32; 2],
    pub round_started: String,
    pub decided_at: String,
}

pub struct AgentSlot {
    pub id: String,
    pub policy: BoxedPolicy,
}

#[derive(Clone, Debug)]
pub struct SessionOptions {
    pub human_seat: usize,
    pub horizon: u32,
    pub rounds: usize,
    pub tutorial_games: usize,
    pub seed: u64,
}

/// Append-only per-session files, synced after every write.
#[derive(Clone, Debug)]
pub struct SessionStore {
    pub dir: PathBuf,
}

impl SessionStore {
    pub fn new(data_dir: &Path, session: &str) -> std::io::Result<Self> {
        let dir = data_dir.join("sessions").join(session);
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    fn append(&self, file: &str, lines: &[String]) -> std::io::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.dir.join(file))?;
        for l in lines {
            f.write_all(l.as_bytes())?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
        f.sync_data()
    }

    pub fn append_transcript(&self, records: &[TrajectoryRecord]) -> std::io::Result<()> {
        let lines: Vec<String> = records.iter().map(|r| serde_json::to_string(r).expect("record serializes")).collect();
        self.append(TRANSCRIPT_FILE, &lines)
    }

    pub fn append_preference(&self, record: &PreferenceRecord) -> std::io::Result<()> {
        self.append(PREFERENCES_FILE, &[serde_json::to_string(record).expect("record serializes")])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Tutorial(usize),
    Round { round: usize, episode: usize },
}

pub struct Session {
    pub id: String,
    layout: Layout,
    options: SessionOptions,
    phase: Phase,
    stage: Stage,
    state: WorldState,
    pending: Option<Action>,
    agents: Vec<AgentSlot>,
    tutor: ScriptedCook,
    pairing: [usize; 2],
    round_scores: Vec<u32>,
    round_started: String,
    episode_log: Vec<TrajectoryRecord>,
    preferences: Vec<PreferenceRecord>,
    store: Option<SessionStore>,
    rng: ChaCha8Rng,
}

fn now() -> String {
    chrono::Local::now().to_rfc3339()
}

impl Session {
    pub fn new(
        id: &str,
        layout: Layout,
        agents: Vec<AgentSlot>,
        options: SessionOptions,
        store: Option<SessionStore>,
    ) -> Result<Self, SessionError> {
        if agents.len() < 2 && options.rounds > 0 {
            return Err(SessionError::TooFewAgents);
        }
        let state = reset(&layout);
        let rng = ChaCha8Rng::seed_from_u64(options.seed);
        Ok(Self {
            id: id.to_string(),
            layout,
            options,
            phase: Phase::Lobby,
            stage: Stage::Tutorial(0),
            state,
            pending: None,
            agents,
            tutor: ScriptedCook,
            pairing: [0, 1],
            round_scores: Vec::new(),
            round_started: String::new(),
            episode_log: Vec::new(),
            preferences: Vec::new(),
            store,
            rng,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn preferences(&self) -> &[PreferenceRecord] {
        &self.preferences
    }

    /// Unmasked ids of the agents behind "Partner A" and "Partner B" this round.
    pub fn pairing(&self) -> [&str; 2] {
        [&self.agents[self.pairing[0]].id, &self.agents[self.pairing[1]].id]
    }

    pub fn hello(&self, tick_ms: u64) -> ServerMessage {
        ServerMessage::Hello {
            layout: self.layout.name.clone(),
            grid: self.layout.to_text(),
            seat: self.options.human_seat,
            tick_ms,
            horizon: self.options.horizon,
        }
    }

    fn episode_id(&self) -> String {
        match self.stage {
            Stage::Tutorial(k) => format!("{}-t{k}", self.id),
            Stage::Round { round, episode } => format!("{}-r{round}-e{episode}", self.id),
        }
    }

    fn partner_label(&self) -> String {
        match self.stage {
            Stage::Tutorial(_) => "Tutorial".into(),
            Stage::Round { episode, .. } => PARTNER_LABELS[episode].into(),
        }
    }

    pub fn state_message(&self) -> ServerMessage {
        let (round, episode) = match self.stage {
            Stage::Tutorial(_) => (0, 0),
            Stage::Round { round, episode } => (round, episode),
        };
        let mut scores = self.round_scores.clone();
        scores.push(self.state.score);
        ServerMessage::State {
            tick: self.state.tick,
            state: self.state.clone(),
            scores,
            partner: self.partner_label(),
            round,
            episode,
            digest: self.state.digest(),
        }
    }

    fn draw_pairing(&mut self) {
        let picked = sample(&mut self.rng, self.agents.len(), 2);
        self.pairing = [picked.index(0), picked.index(1)];
        self.round_scores.clear();
        self.round_started = now();
    }

    fn begin_episode(&mut self) -> Vec<ServerMessage> {
        if let Stage::Round { episode: 0, .. } = self.stage {
            self.draw_pairing();
        }
        self.state = reset(&self.layout);
        self.pending = None;
        self.episode_log.clear();
        let seed = self.rng.random();
        self.partner().reset(seed);
        self.phase = Phase::Playing;
        vec![self.state_message()]
    }

    fn partner(&mut self) -> &mut dyn Policy {
        match self.stage {
            Stage::Tutorial(_) => &mut self.tutor,
            Stage::Round { episode, .. } => self.agents[self.pairing[episode]].policy.as_mut(),
        }
    }

    /// Lobby to the first episode.
    pub fn start(&mut self) -> Result<Vec<ServerMessage>, SessionError> {
        if self.phase != Phase::Lobby {
            return Err(SessionError::WrongPhase { action: "start", phase: self.phase });
        }
        self.stage = if self.options.tutorial_games > 0 {
            Stage::Tutorial(0)
        } else if self.options.rounds > 0 {
            Stage::Round { round: 0, episode: 0 }
        } else {
            self.phase = Phase::Done;
            return Ok(vec![ServerMessage::Done {}]);
        };
        Ok(self.begin_episode())
    }

    /// Buffer the human's action for the next tick; a later input in the
    /// same tick replaces it. Ignored outside play.
    pub fn input(&mut self, action: Action) -> bool {
        if self.phase == Phase::Playing {
            self.pending = Some(action);
            true
        } else {
            false
        }
    }

    /// Advance one environment step.
    pub fn tick(&mut self) -> Result<Vec<ServerMessage>, SessionError> {
        if self.phase != Phase::Playing {
            return Err(SessionError::WrongPhase { action: "tick", phase: self.phase });
        }
        let human = self.options.human_seat;
        let agent_seat = 1 - human;
        let human_action = self.pending.take().unwrap_or(Action::Stay);
        let features = encode_observation(&self.state, &self.layout, agent_seat);
        let state = self.state.clone();
        let layout = self.layout.clone();
        let view = SeatView { state: &state, layout: &layout, seat: agent_seat, features: &features };
        let dist = self.partner().distribution(&view).map_err(|e| SessionError::Inference(e.to_string()))?;
        let agent_action = Action::ALL[sample_categorical(&dist, &mut self.rng)];
        let mut joint = [Action::Stay; 2];
        joint[human] = human_action;
        joint[agent_seat] = agent_action;

        let outcome = step(&self.state, joint, &self.layout, &ShapingConfig::disabled(), self.options.horizon)?;
        let id = self.episode_id();
        self.episode_log.push(TrajectoryRecord::from_outcome(&id, &self.layout.name, self.state.tick, joint, &outcome));
        self.state = outcome.next_state;
        let mut out = vec![self.state_message()];
        if self.state.tick >= self.options.horizon {
            out.extend(self.end_episode()?);
        }
        Ok(out)
    }

    fn end_episode(&mut self) -> Result<Vec<ServerMessage>, SessionError> {
        if let Some(store) = &self.store {
            store.append_transcript(&self.episode_log)?;
        }
        let score = self.state.score;
        match self.stage {
            Stage::Tutorial(k) => {
                self.phase = Phase::BetweenEpisodes;
                self.stage = if k + 1 < self.options.tutorial_games {
                    Stage::Tutorial(k + 1)
                } else if self.options.rounds > 0 {
                    Stage::Round { round: 0, episode: 0 }
                } else {
                    self.phase = Phase::Done;
                    return Ok(vec![ServerMessage::Done {}]);
                };
                Ok(vec![])
            }
            Stage::Round { round, episode: 0 } => {
                self.round_scores.push(score);
                self.stage = Stage::Round { round, episode: 1 };
                self.phase = Phase::BetweenEpisodes;
                Ok(vec![])
            }
            Stage::Round { round, .. } => {
                self.round_scores.push(score);
                self.phase = Phase::Preference;
                Ok(vec![
                    ServerMessage::RoundEnd { round, scores: self.round_scores.clone() },
                    ServerMessage::PromptPreference { round, labels: PARTNER_LABELS.map(String::from) },
                ])
            }
        }
    }

    /// Start the next episode after a pause.
    pub fn next_episode(&mut self) -> Result<Vec<ServerMessage>, SessionError> {
        if self.phase != Phase::BetweenEpisodes {
            return Err(SessionError::WrongPhase { action: "next_episode", phase: self.phase });
        }
        Ok(self.begin_episode())
    }

    /// Record the round's preference. The record is on disk before this returns.
    pub fn preference(&mut self, choice: i8) -> Result<(PreferenceRecord, Vec<ServerMessage>), SessionError> {
        if self.phase != Phase::Preference {
            return Err(SessionError::WrongPhase { action: "preference", phase: self.phase });
        }
        if choice != -1 && choice != 1 {
            return Err(SessionError::InvalidChoice(choice));
        }
        let Stage::Round { round, .. } = self.stage else { unreachable!("preference phase only follows a round") };
        let [a, b] = self.pairing();
        let record = PreferenceRecord {
            session: self.id.clone(),
            round,
            agent_a: a.to_string(),
            agent_b: b.to_string(),
            choice,
            scores: [self.round_scores[0], self.round_scores[1]],
            round_started: self.round_started.clone(),
            decided_at: now(),
        };
        if let Some(store) = &self.store {
            store.append_preference(&record)?;
        }
        self.preferences.push(record.clone());
        if round + 1 >= self.options.rounds {
            self.phase = Phase::Done;
            Ok((record, vec![ServerMessage::Done {}]))
        } else {
            self.stage = Stage::Round { round: round + 1, episode: 0 };
            self.phase = Phase::BetweenEpisodes;
            Ok((record, vec![]))
        }
    }
}
