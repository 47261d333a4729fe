//! Wire protocol: one JSON object per websocket text frame, tagged by `type`.

use hipt_core::env::{Action, WorldState};
use serde::{Deserialize, Deserializer, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Join {
        session: String,
    },
    Input {
        #[serde(deserialize_with = "action_from_name")]
        action: Action,
    },
    Preference {
        choice: i8,
    },
}

/// Accepts `north`, `North`, `NORTH` and so on.
fn action_from_name<'de, D: Deserializer<'de>>(d: D) -> Result<Action, D::Error> {
    let name = String::deserialize(d)?;
    Action::ALL
        .into_iter()
        .find(|a| format!("{a:?}").eq_ignore_ascii_case(&name))
        .ok_or_else(|| serde::de::Error::custom(format!("unknown action {name:?}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        layout: String,
        /// Grid text of the layout, one row per line.
        grid: String,
        seat: usize,
        tick_ms: u64,
        horizon: u32,
    },
    State {
        tick: u32,
        state: WorldState,
        /// Finished episode scores of the current round, then the running score.
        scores: Vec<u32>,
        /// Masked partner label, e.g. "Partner A".
        partner: String,
        round: usize,
        episode: usize,
        digest: String,
    },
    RoundEnd {
        round: usize,
        scores: Vec<u32>,
    },
    PromptPreference {
        round: usize,
        labels: [String; 2],
    },
    Done {},
    Error {
        message: String,
    },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

pub fn parse_client(text: &str) -> Result<ClientMessage, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}
