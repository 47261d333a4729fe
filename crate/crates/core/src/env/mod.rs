//! Two-player cooperative kitchen gridworld.
//!
//! Chefs gather onions from dispensers, fill a pot with three of them, wait
//! for it to cook, plate the soup with a dish and carry it to a serving
//! counter. Each delivery pays both players 20. Transitions are deterministic
//! and every function here is pure.

mod engine;
mod episode;
mod layout;
mod observation;
mod state;
mod trajectory;

pub use engine::{reset, step, StepError, DEFAULT_HORIZON, DELIVERY_REWARD};
pub use episode::{run_episode, Episode, EpisodeError, SeatStep};
pub use layout::{
    bundled_layout, bundled_layout_names, bundled_layout_text, bundled_layouts, canonical_text, parse_layout, Cell,
    Direction, Layout, LayoutError, Position, StartPosition, DEFAULT_COOK_TIME,
};
pub use observation::{decode_observation, encode_into, encode_observation, observation_len};
pub use state::{
    shaping_factor, Action, Event, Item, JointAction, PlayerState, PotState, ShapedReward, ShapingConfig, StepOutcome,
    WorldState, NUM_ACTIONS,
};
pub use trajectory::{
    group_episodes, read_jsonl, replay, write_jsonl, ReplayError, ReplaySummary, TrajectoryError, TrajectoryRecord,
};
