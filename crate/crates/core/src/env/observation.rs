//! Flat egocentric feature encoding of a [`WorldState`].
//!
//! Blocks, in order: observing player, other player, pots, counters, tick.
//! A player block is a one-hot cell index, a one-hot orientation and a one-hot
//! held item. A pot block is a one-hot onion count, the remaining cook time as
//! a fraction of the layout's cook time and a ready flag. A counter block is a
//! one-hot over {empty, onion, dish}. The encoding is lossless; see
//! [`decode_observation`].

use super::engine::DEFAULT_HORIZON;
use super::layout::{Direction, Layout, Position};
use super::state::{Item, PlayerState, PotState, WorldState};

const HELD_SLOTS: usize = 4;
const POT_SLOTS: usize = 6;
const COUNTER_SLOTS: usize = 3;

fn player_block_len(layout: &Layout) -> usize {
    layout.num_cells() + Direction::ALL.len() + HELD_SLOTS
}

pub fn observation_len(layout: &Layout) -> usize {
    2 * player_block_len(layout) + POT_SLOTS * layout.pots().len() + COUNTER_SLOTS * layout.counters().len() + 1
}

fn held_slot(item: Option<Item>) -> usize {
    match item {
        None => 0,
        Some(Item::Onion) => 1,
        Some(Item::Dish) => 2,
        Some(Item::Soup) => 3,
    }
}

pub fn encode_observation(state: &WorldState, layout: &Layout, agent_index: usize) -> Vec<f64> {
    let mut out = vec![0.0; observation_len(layout)];
    encode_into(state, layout, agent_index, &mut out);
    out
}

/// Encode into a caller-provided buffer of length [`observation_len`].
pub fn encode_into(state: &WorldState, layout: &Layout, agent_index: usize, out: &mut [f64]) {
    assert!(agent_index < 2, "agent index must be 0 or 1");
    assert_eq!(out.len(), observation_len(layout));
    out.fill(0.0);
    let block = player_block_len(layout);
    for (slot, seat) in [agent_index, 1 - agent_index].into_iter().enumerate() {
        let p = &state.players[seat];
        let base = slot * block;
        out[base + layout.cell_index(p.position)] = 1.0;
        out[base + layout.num_cells() + p.orientation.index()] = 1.0;
        out[base + layout.num_cells() + 4 + held_slot(p.held)] = 1.0;
    }
    let mut offset = 2 * block;
    let cook = layout.cook_time.max(1) as f64;
    for pot in &state.pots {
        out[offset + pot.onions as usize] = 1.0;
        out[offset + 4] = pot.cook_timer as f64 / cook;
        out[offset + 5] = if pot.is_ready() { 1.0 } else { 0.0 };
        offset += POT_SLOTS;
    }
    for item in &state.counters {
        let slot = match item {
            None => 0,
            Some(Item::Onion) => 1,
            Some(Item::Dish) => 2,
            Some(Item::Soup) => unreachable!("soup never rests on a counter"),
        };
        out[offset + slot] = 1.0;
        offset += COUNTER_SLOTS;
    }
    out[offset] = state.tick as f64 / DEFAULT_HORIZON as f64;
}

fn argmax(xs: &[f64]) -> usize {
    xs.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best }).0
}

/// Inverse of [`encode_observation`]. The score is not observed and is
/// returned as zero.
pub fn decode_observation(features: &[f64], layout: &Layout, agent_index: usize) -> WorldState {
    let block = player_block_len(layout);
    let cells = layout.num_cells();
    let mut players = [PlayerState { position: Position::new(0, 0), orientation: Direction::North, held: None }; 2];
    for (slot, seat) in [agent_index, 1 - agent_index].into_iter().enumerate() {
        let b = &features[slot * block..(slot + 1) * block];
        let cell = argmax(&b[..cells]);
        players[seat] = PlayerState {
            position: Position::new(cell % layout.width, cell / layout.width),
            orientation: Direction::ALL[argmax(&b[cells..cells + 4])],
            held: match argmax(&b[cells + 4..cells + 8]) {
                0 => None,
                1 => Some(Item::Onion),
                2 => Some(Item::Dish),
                _ => Some(Item::Soup),
            },
        };
    }
    let mut offset = 2 * block;
    let cook = layout.cook_time.max(1) as f64;
    let mut pots = Vec::with_capacity(layout.pots().len());
    for _ in layout.pots() {
        let b = &features[offset..offset + POT_SLOTS];
        pots.push(PotState { onions: argmax(&b[..4]) as u8, cook_timer: (b[4] * cook).round() as u32 });
        offset += POT_SLOTS;
    }
    let mut counters = Vec::with_capacity(layout.counters().len());
    for _ in layout.counters() {
        counters.push(match argmax(&features[offset..offset + COUNTER_SLOTS]) {
            0 => None,
            1 => Some(Item::Onion),
            _ => Some(Item::Dish),
        });
        offset += COUNTER_SLOTS;
    }
    let tick = (features[offset] * DEFAULT_HORIZON as f64).round() as u32;
    WorldState { tick, players, pots, counters, score: 0 }
}
