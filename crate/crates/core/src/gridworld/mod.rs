//! Minigrid-style door-key simulator with injectable novelties.

mod dynamics;
mod env;
mod grid;
mod policy;
mod render;
mod variant;

pub use dynamics::{nominal_step, transition, Transition};
pub use env::{
    initial_state, make_env, make_env_by_id, teleport_rng, EnvConfig, Environment, StepOutcome,
    GRID_SIZE, TELEPORT_STREAM,
};
pub use grid::{Action, CellKind, Color, Direction, GridState, Item, RewardSignal};
pub use policy::{random_policy, scripted_policy, shortest_plan, ScriptedPolicy};
pub use render::{render, render_with_tile, Observation, DEFAULT_TILE_SIZE};
pub use variant::{EnvVariant, VariantKind};

use crate::harness::EpisodeTrace;

/// Index of the first step whose observation carries the variant's novelty.
///
/// Functional variants use the simulator's rule-firing log: the onset is the
/// first observation produced by a transition the modified rule changed.
/// Visual variants report the first frame whose layout departs from the
/// nominal structure, which is step 0 for every catalogued visual variant.
pub fn novelty_onset(trace: &EpisodeTrace, variant: &EnvVariant) -> Option<usize> {
    if variant.kind == VariantKind::Nominal {
        return None;
    }
    trace.steps.iter().position(|s| s.novel)
}
