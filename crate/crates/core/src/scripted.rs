//! A deterministic hand-written chef used for fixtures, tutorial partners and
//! behavior-cloning datasets.

use std::collections::VecDeque;

use crate::env::{Action, Cell, Direction, Item, Layout, Position, WorldState};
use crate::policy::{one_hot_distribution, ActionDistribution, Policy, PolicyError, SeatView};

/// Greedy solo cook: always works toward the next step of the soup cycle,
/// walking shortest paths and treating the partner as an obstacle.
#[derive(Clone, Copy, Debug, Default)]
pub struct ScriptedCook;

impl ScriptedCook {
    pub fn decide(&self, state: &WorldState, layout: &Layout, seat: usize) -> Action {
        let goals = goal_cells(state, layout, seat);
        if goals.is_empty() {
            return Action::Stay;
        }
        let me = state.players[seat];
        let blocked = state.players[1 - seat].position;

        // Already adjacent to a goal: face it, then interact.
        for dir in Direction::ALL {
            if let Some(n) = me.position.step(dir, layout.width, layout.height) {
                if goals.contains(&n) {
                    return if me.orientation == dir { Action::Interact } else { move_action(dir) };
                }
            }
        }

        match first_step_toward(me.position, blocked, layout, |p| adjacent_to_any(p, &goals, layout)) {
            Some(dir) => move_action(dir),
            None => Action::Stay,
        }
    }
}

impl Policy for ScriptedCook {
    fn distribution(&mut self, view: &SeatView<'_>) -> Result<ActionDistribution, PolicyError> {
        Ok(one_hot_distribution(self.decide(view.state, view.layout, view.seat).index()))
    }
}

fn move_action(dir: Direction) -> Action {
    match dir {
        Direction::North => Action::North,
        Direction::South => Action::South,
        Direction::East => Action::East,
        Direction::West => Action::West,
    }
}

fn adjacent_to_any(p: Position, goals: &[Position], layout: &Layout) -> bool {
    Direction::ALL.iter().filter_map(|&d| p.step(d, layout.width, layout.height)).any(|n| goals.contains(&n))
}

/// BFS over floor cells; returns the first move of a shortest path to any cell
/// satisfying `done`.
fn first_step_toward(
    start: Position,
    blocked: Position,
    layout: &Layout,
    done: impl Fn(Position) -> bool,
) -> Option<Direction> {
    let mut first: Vec<Option<Direction>> = vec![None; layout.num_cells()];
    let mut seen = vec![false; layout.num_cells()];
    let mut queue = VecDeque::new();
    seen[layout.cell_index(start)] = true;
    queue.push_back(start);
    while let Some(p) = queue.pop_front() {
        if p != start && done(p) {
            return first[layout.cell_index(p)];
        }
        for dir in Direction::ALL {
            let Some(n) = p.step(dir, layout.width, layout.height) else { continue };
            let i = layout.cell_index(n);
            if seen[i] || !layout.is_walkable(n) || n == blocked {
                continue;
            }
            seen[i] = true;
            first[i] = if p == start { Some(dir) } else { first[layout.cell_index(p)] };
            queue.push_back(n);
        }
    }
    None
}

fn goal_cells(state: &WorldState, layout: &Layout, seat: usize) -> Vec<Position> {
    let cells_of = |kind: Cell| layout.cells().filter(|(_, c)| *c == kind).map(|(p, _)| p).collect::<Vec<_>>();
    let pots_where = |f: &dyn Fn(usize) -> bool| {
        layout.pots().iter().enumerate().filter(|(i, _)| f(*i)).map(|(_, &p)| p).collect::<Vec<_>>()
    };
    let counters_with = |item: Option<Item>| {
        layout
            .counters()
            .iter()
            .enumerate()
            .filter(|(i, _)| state.counters[*i] == item)
            .map(|(_, &p)| p)
            .collect::<Vec<_>>()
    };
    let partner_has_dish = state.players[1 - seat].held == Some(Item::Dish);
    let soup_coming = layout.pots().iter().enumerate().any(|(i, _)| {
        let pot = state.pots[i];
        pot.is_cooking() || pot.is_ready()
    });

    match state.players[seat].held {
        Some(Item::Soup) => cells_of(Cell::ServingCounter),
        Some(Item::Dish) => {
            let ready = pots_where(&|i| state.pots[i].is_ready());
            if !ready.is_empty() {
                return ready;
            }
            let cooking = pots_where(&|i| state.pots[i].is_cooking());
            if !cooking.is_empty() {
                return cooking;
            }
            layout.pots().to_vec()
        }
        Some(Item::Onion) => {
            let open = pots_where(&|i| state.pots[i].accepts_onion());
            if !open.is_empty() {
                return open;
            }
            counters_with(None)
        }
        None => {
            if soup_coming && !partner_has_dish {
                let mut g = cells_of(Cell::DishDispenser);
                g.extend(counters_with(Some(Item::Dish)));
                return g;
            }
            if layout.pots().iter().enumerate().any(|(i, _)| state.pots[i].accepts_onion()) {
                let mut g = cells_of(Cell::OnionDispenser);
                g.extend(counters_with(Some(Item::Onion)));
                return g;
            }
            cells_of(Cell::DishDispenser)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{bundled_layout, run_episode, ShapingConfig};
    use crate::policy::StayPolicy;

    #[test]
    fn solo_cook_delivers_on_cramped_room() {
        let layout = bundled_layout("cramped_room").unwrap();
        let ep = run_episode(&mut ScriptedCook, &mut StayPolicy, &layout, 400, &ShapingConfig::disabled(), 0).unwrap();
        assert!(ep.episode_return >= 20, "return {}", ep.episode_return);
        assert_eq!(ep.episode_return as usize, 20 * ep.deliveries());
    }
}
