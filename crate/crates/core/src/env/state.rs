use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layout::{Direction, Layout, Position};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Item {
    Onion,
    Dish,
    /// A dish holding cooked onion soup.
    Soup,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    North,
    South,
    East,
    West,
    Stay,
    Interact,
}

pub const NUM_ACTIONS: usize = 6;

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] =
        [Action::North, Action::South, Action::East, Action::West, Action::Stay, Action::Interact];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            Action::North => Some(Direction::North),
            Action::South => Some(Direction::South),
            Action::East => Some(Direction::East),
            Action::West => Some(Direction::West),
            Action::Stay | Action::Interact => None,
        }
    }
}

/// Ordered pair of actions, seat 0 first.
pub type JointAction = [Action; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlayerState {
    pub position: Position,
    pub orientation: Direction,
    pub held: Option<Item>,
}

impl PlayerState {
    pub fn facing(&self, layout: &Layout) -> Option<Position> {
        self.position.step(self.orientation, layout.width, layout.height)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PotState {
    pub onions: u8,
    /// Remaining cook ticks; only meaningful once the pot holds three onions.
    pub cook_timer: u32,
}

impl PotState {
    pub const CAPACITY: u8 = 3;

    pub fn is_ready(&self) -> bool {
        self.onions == Self::CAPACITY && self.cook_timer == 0
    }

    pub fn is_cooking(&self) -> bool {
        self.cook_timer > 0
    }

    pub fn accepts_onion(&self) -> bool {
        self.onions < Self::CAPACITY
    }
}

/// Dynamic game state. Pots and counters are indexed like [`Layout::pots`]
/// and [`Layout::counters`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u32,
    pub players: [PlayerState; 2],
    pub pots: Vec<PotState>,
    pub counters: Vec<Option<Item>>,
    pub score: u32,
}

impl WorldState {
    /// Hex SHA-256 over the canonical JSON serialization.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("world state serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn player_at(&self, pos: Position) -> Option<usize> {
        self.players.iter().position(|p| p.position == pos)
    }
}

/// Structured record of something that happened during a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    OnionPickup { player: usize },
    DishPickup { player: usize },
    CounterPickup { player: usize, item: Item },
    CounterDrop { player: usize, item: Item },
    OnionInPot { player: usize, pot: usize },
    CookStarted { pot: usize },
    SoupPickup { player: usize, pot: usize },
    SoupDelivered { player: usize },
}

/// Per-player shaped reward components.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShapedReward {
    pub pickup_drop: f64,
    pub delivery_penalty: f64,
}

impl ShapedReward {
    pub fn total(&self) -> f64 {
        self.pickup_drop + self.delivery_penalty
    }
}

/// Training-only shaped rewards. `scale` carries the annealing factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapingConfig {
    pub enabled: bool,
    pub pickup_drop: f64,
    pub delivery_penalty: f64,
    pub scale: f64,
}

impl ShapingConfig {
    pub const fn disabled() -> Self {
        Self { enabled: false, pickup_drop: 3.0, delivery_penalty: -20.0, scale: 1.0 }
    }

    /// Default shaping for a layout, honoring its `shaping_enabled` flag.
    pub fn for_layout(layout: &Layout) -> Self {
        Self { enabled: layout.shaping_enabled, ..Self::disabled() }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }
}

impl Default for ShapingConfig {
    fn default() -> Self {
        Self { enabled: true, ..Self::disabled() }
    }
}

/// Linear anneal of the shaping factor from 1 to 0 over `fraction` of training.
pub fn shaping_factor(progress: f64, fraction: f64) -> f64 {
    if fraction <= 0.0 {
        return 0.0;
    }
    (1.0 - progress / fraction).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next_state: WorldState,
    /// Shared by both players: 20 per delivery this tick.
    pub sparse_reward: u32,
    pub shaped_rewards: [ShapedReward; 2],
    pub events: Vec<Event>,
}

impl StepOutcome {
    /// Training reward for one seat: sparse plus shaped components.
    pub fn training_reward(&self, seat: usize) -> f64 {
        self.sparse_reward as f64 + self.shaped_rewards[seat].total()
    }

    pub fn deliveries(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, Event::SoupDelivered { .. })).count()
    }
}
