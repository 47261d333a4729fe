//! Deterministic transition function.

use thiserror::Error;

use super::layout::{Cell, Layout, Position};
use super::state::{
    Action, Event, Item, JointAction, PlayerState, PotState, ShapedReward, ShapingConfig, StepOutcome, WorldState,
};

/// Reward shared by both players for every soup delivered.
pub const DELIVERY_REWARD: u32 = 20;

/// Default episode length in ticks.
pub const DEFAULT_HORIZON: u32 = 400;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StepError {
    #[error("step called at tick {tick} on an episode of horizon {horizon}")]
    EpisodeOver { tick: u32, horizon: u32 },
}

pub fn reset(layout: &Layout) -> WorldState {
    let player = |i: usize| PlayerState {
        position: layout.start_positions[i].position,
        orientation: layout.start_positions[i].orientation,
        held: None,
    };
    WorldState {
        tick: 0,
        players: [player(0), player(1)],
        pots: vec![PotState::default(); layout.pots().len()],
        counters: vec![None; layout.counters().len()],
        score: 0,
    }
}

/// Advance one tick. Interactions resolve in seat order, then movement.
pub fn step(
    state: &WorldState,
    joint: JointAction,
    layout: &Layout,
    shaping: &ShapingConfig,
    horizon: u32,
) -> Result<StepOutcome, StepError> {
    if state.tick >= horizon {
        return Err(StepError::EpisodeOver { tick: state.tick, horizon });
    }
    let mut next = state.clone();
    let mut events = Vec::new();

    for pot in next.pots.iter_mut() {
        pot.cook_timer = pot.cook_timer.saturating_sub(1);
    }

    for (seat, &action) in joint.iter().enumerate() {
        if action == Action::Interact {
            interact(&mut next, seat, layout, &mut events);
        }
    }

    resolve_movement(&mut next, joint, layout);

    let mut sparse = 0;
    let mut shaped = [ShapedReward::default(); 2];
    let shaping_on = shaping.enabled && layout.shaping_enabled;
    for event in &events {
        match *event {
            Event::SoupDelivered { player } => {
                sparse += DELIVERY_REWARD;
                if shaping_on {
                    shaped[1 - player].delivery_penalty += shaping.delivery_penalty * shaping.scale;
                }
            }
            Event::OnionPickup { player } | Event::OnionInPot { player, .. } if shaping_on => {
                shaped[player].pickup_drop += shaping.pickup_drop * shaping.scale;
            }
            _ => {}
        }
    }
    next.score += sparse;
    next.tick += 1;

    Ok(StepOutcome { next_state: next, sparse_reward: sparse, shaped_rewards: shaped, events })
}

fn interact(state: &mut WorldState, seat: usize, layout: &Layout, events: &mut Vec<Event>) {
    let Some(target) = state.players[seat].facing(layout) else {
        return;
    };
    let held = state.players[seat].held;
    match (layout.cell(target), held) {
        (Cell::OnionDispenser, None) => {
            state.players[seat].held = Some(Item::Onion);
            events.push(Event::OnionPickup { player: seat });
        }
        (Cell::DishDispenser, None) => {
            state.players[seat].held = Some(Item::Dish);
            events.push(Event::DishPickup { player: seat });
        }
        (Cell::Counter, _) => {
            let idx = layout.counter_index(target).expect("counter cells are indexed");
            match (state.counters[idx], held) {
                (Some(item), None) => {
                    state.counters[idx] = None;
                    state.players[seat].held = Some(item);
                    events.push(Event::CounterPickup { player: seat, item });
                }
                // Soup never rests on a counter.
                (None, Some(item)) if item != Item::Soup => {
                    state.counters[idx] = Some(item);
                    state.players[seat].held = None;
                    events.push(Event::CounterDrop { player: seat, item });
                }
                _ => {}
            }
        }
        (Cell::Pot, Some(Item::Onion)) => {
            let idx = layout.pot_index(target).expect("pot cells are indexed");
            let pot = &mut state.pots[idx];
            if pot.accepts_onion() {
                pot.onions += 1;
                state.players[seat].held = None;
                events.push(Event::OnionInPot { player: seat, pot: idx });
                if pot.onions == PotState::CAPACITY {
                    pot.cook_timer = layout.cook_time;
                    events.push(Event::CookStarted { pot: idx });
                }
            }
        }
        (Cell::Pot, Some(Item::Dish)) => {
            let idx = layout.pot_index(target).expect("pot cells are indexed");
            if state.pots[idx].is_ready() {
                state.pots[idx] = PotState::default();
                state.players[seat].held = Some(Item::Soup);
                events.push(Event::SoupPickup { player: seat, pot: idx });
            }
        }
        (Cell::ServingCounter, Some(Item::Soup)) => {
            state.players[seat].held = None;
            events.push(Event::SoupDelivered { player: seat });
        }
        _ => {}
    }
}

/// Movement rotates the player even when blocked. Two players targeting the
/// same cell, or swapping cells, both stay put.
fn resolve_movement(state: &mut WorldState, joint: JointAction, layout: &Layout) {
    let mut targets: [Position; 2] = [state.players[0].position, state.players[1].position];
    for (seat, action) in joint.iter().enumerate() {
        if let Some(dir) = action.direction() {
            let player = &mut state.players[seat];
            player.orientation = dir;
            if let Some(dest) = player.position.step(dir, layout.width, layout.height) {
                if layout.is_walkable(dest) {
                    targets[seat] = dest;
                }
            }
        }
    }
    let current = [state.players[0].position, state.players[1].position];
    let same_cell = targets[0] == targets[1];
    let swap = targets[0] == current[1] && targets[1] == current[0];
    if same_cell || swap {
        return;
    }
    for seat in 0..2 {
        state.players[seat].position = targets[seat];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::layout::{bundled_layout, Direction};

    fn cramped() -> Layout {
        bundled_layout("cramped_room").unwrap()
    }

    fn go(state: &WorldState, joint: JointAction, layout: &Layout) -> StepOutcome {
        step(state, joint, layout, &ShapingConfig::default(), DEFAULT_HORIZON).unwrap()
    }

    #[test]
    fn reset_matches_start_positions() {
        let l = cramped();
        let s = reset(&l);
        assert_eq!(s.tick, 0);
        assert_eq!(s.score, 0);
        for i in 0..2 {
            assert_eq!(s.players[i].position, l.start_positions[i].position);
            assert_eq!(s.players[i].held, None);
        }
        assert_eq!(reset(&l), s);
    }

    #[test]
    fn stay_only_advances_time() {
        let l = cramped();
        let mut s = reset(&l);
        s.pots[0] = PotState { onions: 3, cook_timer: 5 };
        let out = go(&s, [Action::Stay, Action::Stay], &l);
        let mut expected = s.clone();
        expected.tick += 1;
        expected.pots[0].cook_timer = 4;
        assert_eq!(out.next_state, expected);
        assert_eq!(out.sparse_reward, 0);
    }

    #[test]
    fn blocked_move_rotates() {
        let l = cramped();
        let s = reset(&l);
        // Blue at (1,2); west is a counter.
        let out = go(&s, [Action::West, Action::Stay], &l);
        assert_eq!(out.next_state.players[0].position, s.players[0].position);
        assert_eq!(out.next_state.players[0].orientation, Direction::West);
    }

    #[test]
    fn collisions_cancel_both_moves() {
        let l = cramped();
        let mut s = reset(&l);
        s.players[0].position = Position::new(1, 1);
        s.players[1].position = Position::new(3, 1);
        let out = go(&s, [Action::East, Action::West], &l);
        assert_eq!(out.next_state.players[0].position, Position::new(1, 1));
        assert_eq!(out.next_state.players[1].position, Position::new(3, 1));

        s.players[1].position = Position::new(2, 1);
        let out = go(&s, [Action::East, Action::West], &l);
        assert_eq!(out.next_state.players[0].position, Position::new(1, 1));
        assert_eq!(out.next_state.players[1].position, Position::new(2, 1));

        // Following into a vacated cell is allowed.
        let out = go(&s, [Action::East, Action::East], &l);
        assert_eq!(out.next_state.players[0].position, Position::new(2, 1));
        assert_eq!(out.next_state.players[1].position, Position::new(3, 1));
    }

    #[test]
    fn delivery_pays_both_and_penalizes_partner() {
        let l = cramped();
        let mut s = reset(&l);
        // Green at (3,2) facing south onto the serving counter (3,3).
        s.players[1].position = Position::new(3, 2);
        s.players[1].orientation = Direction::South;
        s.players[1].held = Some(Item::Soup);
        let out = go(&s, [Action::Stay, Action::Interact], &l);
        assert_eq!(out.sparse_reward, 20);
        assert_eq!(out.next_state.score, 20);
        assert_eq!(out.shaped_rewards[0].delivery_penalty, -20.0);
        assert_eq!(out.shaped_rewards[1].delivery_penalty, 0.0);
        assert_eq!(out.training_reward(0), 0.0);
        assert_eq!(out.training_reward(1), 20.0);

        let quiet = step(&s, [Action::Stay, Action::Interact], &l, &ShapingConfig::disabled(), 400).unwrap();
        assert_eq!(quiet.sparse_reward, 20);
        assert_eq!(quiet.shaped_rewards, [ShapedReward::default(); 2]);
    }

    #[test]
    fn pot_cooks_after_three_onions() {
        let l = cramped().with_cook_time(2);
        let mut s = reset(&l);
        s.players[0].position = Position::new(2, 1);
        s.players[0].orientation = Direction::North;
        for _ in 0..3 {
            s.players[0].held = Some(Item::Onion);
            let out = go(&s, [Action::Interact, Action::Stay], &l);
            assert_eq!(out.shaped_rewards[0].pickup_drop, 3.0);
            s = out.next_state;
        }
        assert_eq!(s.pots[0], PotState { onions: 3, cook_timer: 2 });
        s.players[0].held = Some(Item::Dish);
        s = go(&s, [Action::Interact, Action::Stay], &l).next_state;
        assert_eq!(s.players[0].held, Some(Item::Dish), "pot not ready yet");
        s = go(&s, [Action::Interact, Action::Stay], &l).next_state;
        assert_eq!(s.players[0].held, Some(Item::Soup));
        assert_eq!(s.pots[0], PotState::default());
    }

    #[test]
    fn counters_hold_onions_and_dishes_but_not_soup() {
        let l = cramped();
        let mut s = reset(&l);
        // Blue at (1,2) facing west onto counter (0,2).
        s.players[0].orientation = Direction::West;
        s.players[0].held = Some(Item::Dish);
        s = go(&s, [Action::Interact, Action::Stay], &l).next_state;
        assert_eq!(s.players[0].held, None);
        assert_eq!(s.counters[l.counter_index(Position::new(0, 2)).unwrap()], Some(Item::Dish));
        s = go(&s, [Action::Interact, Action::Stay], &l).next_state;
        assert_eq!(s.players[0].held, Some(Item::Dish));

        s.players[0].held = Some(Item::Soup);
        let after = go(&s, [Action::Interact, Action::Stay], &l).next_state;
        assert_eq!(after.players[0].held, Some(Item::Soup));
    }

    #[test]
    fn stepping_past_horizon_fails() {
        let l = cramped();
        let mut s = reset(&l);
        s.tick = 10;
        assert_eq!(
            step(&s, [Action::Stay; 2], &l, &ShapingConfig::default(), 10),
            Err(StepError::EpisodeOver { tick: 10, horizon: 10 })
        );
    }
}
