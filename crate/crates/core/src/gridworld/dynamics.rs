//! Transition rules. `nominal_step` is the unmodified minigrid dynamics;
//! `transition` layers the functional novelties on top and reports whether
//! the modified rule changed the outcome.

use rand::Rng;

use super::grid::{Action, CellKind, GridState, Item};
use super::variant::{EnvVariant, VariantKind};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub next: GridState,
    pub reward: f64,
    pub done: bool,
    /// The variant's rule produced an outcome nominal dynamics would not.
    pub fired: bool,
}

fn goal_reward(step_count: u32, max_steps: u32) -> f64 {
    1.0 - 0.9 * (step_count as f64 / max_steps as f64)
}

/// Unmodified dynamics. Returns `(next, reward, done)`.
pub fn nominal_step(state: &GridState, action: Action, max_steps: u32) -> (GridState, f64, bool) {
    let mut next = state.clone();
    next.step_count += 1;
    let mut reward = 0.0;
    let mut done = false;

    match action {
        Action::TurnLeft => next.agent_dir = next.agent_dir.left(),
        Action::TurnRight => next.agent_dir = next.agent_dir.right(),
        Action::Forward => {
            if let Some((col, row)) = state.front_pos() {
                let cell = state.get(col, row);
                if cell.can_overlap() {
                    next.agent_pos = (col, row);
                    match cell {
                        CellKind::Goal => {
                            reward = goal_reward(next.step_count, max_steps);
                            done = true;
                        }
                        CellKind::Lava => done = true,
                        _ => {}
                    }
                }
            }
        }
        Action::Pickup => {
            if let (Some((col, row)), None) = (state.front_pos(), state.carrying) {
                if let Some(item) = state.get(col, row).as_item() {
                    next.carrying = Some(item);
                    next.set(col, row, CellKind::Empty);
                    if let Some(target) = state.fetch_target {
                        done = true;
                        if item == Item::Ball(target) {
                            reward = goal_reward(next.step_count, max_steps);
                        }
                    }
                }
            }
        }
        Action::Drop => {
            if let (Some((col, row)), Some(item)) = (state.front_pos(), state.carrying) {
                if state.get(col, row) == CellKind::Empty {
                    next.set(col, row, item.to_cell());
                    next.carrying = None;
                }
            }
        }
        Action::Toggle => {
            if let Some((col, row)) = state.front_pos() {
                if let CellKind::Door {
                    color,
                    open,
                    locked,
                } = state.get(col, row)
                {
                    let toggled = if locked {
                        (state.carrying == Some(Item::Key(color))).then_some(CellKind::Door {
                            color,
                            open: true,
                            locked: false,
                        })
                    } else {
                        Some(CellKind::Door {
                            color,
                            open: !open,
                            locked: false,
                        })
                    };
                    if let Some(cell) = toggled {
                        next.set(col, row, cell);
                    }
                }
            }
        }
        Action::Done => {}
    }
    (next, reward, done)
}

fn idle(state: &GridState) -> GridState {
    let mut next = state.clone();
    next.step_count += 1;
    next
}

/// Applies `action` under `variant`. Teleport draws from `rng` before the
/// action is applied; no other variant consumes randomness.
pub fn transition<R: Rng + ?Sized>(
    state: &GridState,
    action: Action,
    variant: &EnvVariant,
    max_steps: u32,
    rng: &mut R,
) -> Transition {
    let nominal = nominal_step(state, action, max_steps);
    if !variant.is_active(state.step_count) {
        let (next, reward, done) = nominal;
        return Transition {
            next,
            reward,
            done,
            fired: false,
        };
    }

    let (next, reward, done) = match variant.kind {
        VariantKind::BrokenDoor => match (action, state.front_cell()) {
            (Action::Toggle, Some(CellKind::Door { .. })) => (idle(state), 0.0, false),
            _ => nominal.clone(),
        },
        VariantKind::ActionFlip => {
            if action.is_turn() {
                nominal.clone()
            } else {
                (idle(state), 0.0, false)
            }
        }
        VariantKind::Teleport => {
            let free = state.free_cells();
            let mut moved = state.clone();
            if !free.is_empty() {
                moved.agent_pos = free[rng.gen_range(0..free.len())];
            }
            nominal_step(&moved, action, max_steps)
        }
        VariantKind::FakeGoal => {
            let (next, reward, done) = nominal.clone();
            if state_on_goal(&next) {
                (next, 0.0, false)
            } else {
                (next, reward, done)
            }
        }
        VariantKind::KeyStuck => match (action, state.front_cell()) {
            (Action::Pickup, Some(CellKind::Key { .. })) => (idle(state), 0.0, false),
            _ => nominal.clone(),
        },
        _ => nominal.clone(),
    };
    let fired = next != nominal.0 || done != nominal.2;
    Transition {
        next,
        reward,
        done,
        fired,
    }
}

fn state_on_goal(state: &GridState) -> bool {
    let (col, row) = state.agent_pos;
    state.get(col, row) == CellKind::Goal
}
