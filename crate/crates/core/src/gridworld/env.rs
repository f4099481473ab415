use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dynamics::transition;
use super::grid::{Action, CellKind, Color, Direction, GridState, RewardSignal};
use super::render::{render_with_tile, Observation, DEFAULT_TILE_SIZE};
use super::variant::{EnvVariant, VariantKind};
use crate::error::Result;

pub const GRID_SIZE: usize = 6;
/// RNG stream reserved for teleport draws; layout generation uses stream 0.
pub const TELEPORT_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub tile_size: usize,
    pub max_steps: u32,
    pub discount: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            tile_size: DEFAULT_TILE_SIZE,
            max_steps: 200,
            discount: 0.99,
        }
    }
}

/// Result of one `Environment::step`.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: RewardSignal,
    /// The resulting state carries an observable novelty (see
    /// [`Environment::novel_now`]).
    pub novel: bool,
    pub truncated: bool,
}

#[derive(Clone, Debug)]
pub struct Environment {
    variant: EnvVariant,
    seed: u64,
    config: EnvConfig,
    state: GridState,
    teleport_rng: ChaCha8Rng,
    novel: bool,
    finished: bool,
}

pub fn teleport_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TELEPORT_STREAM);
    rng
}

pub fn make_env(variant: impl Into<EnvVariant>, seed: u64) -> Environment {
    Environment::new(variant.into(), seed, EnvConfig::default())
}

/// Looks up a catalog id such as `"broken-door"`.
pub fn make_env_by_id(id: &str, seed: u64) -> Result<Environment> {
    Ok(make_env(id.parse::<VariantKind>()?, seed))
}

impl Environment {
    pub fn new(variant: EnvVariant, seed: u64, config: EnvConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = initial_state(variant.kind, &mut rng);
        let novel = variant.kind.is_visual() && !state.is_nominal_layout();
        Environment {
            variant,
            seed,
            config,
            state,
            teleport_rng: teleport_rng(seed),
            novel,
            finished: false,
        }
    }

    pub fn variant(&self) -> &EnvVariant {
        &self.variant
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }

    pub fn observation(&self) -> Observation {
        render_with_tile(&self.state, self.config.tile_size)
    }

    /// Whether the current state shows the variant's novelty: for visual
    /// variants the layout departs from the nominal structure; for functional
    /// variants the modified rule changed the transition into this state.
    pub fn novel_now(&self) -> bool {
        self.novel
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn step(&mut self, action: Action) -> StepOutcome {
        let t = transition(
            &self.state,
            action,
            &self.variant,
            self.config.max_steps,
            &mut self.teleport_rng,
        );
        self.state = t.next;
        self.novel = if self.variant.kind.is_visual() {
            !self.state.is_nominal_layout()
        } else {
            t.fired
        };
        let truncated = !t.done && self.state.step_count >= self.config.max_steps;
        self.finished = t.done || truncated;
        StepOutcome {
            observation: self.observation(),
            reward: RewardSignal {
                reward: t.reward,
                done: t.done,
                discount: self.config.discount,
            },
            novel: self.novel,
            truncated,
        }
    }
}

fn pick<R: Rng + ?Sized>(rng: &mut R, cells: &[(usize, usize)]) -> (usize, usize) {
    cells[rng.gen_range(0..cells.len())]
}

fn random_dir<R: Rng + ?Sized>(rng: &mut R) -> Direction {
    Direction::from_index(rng.gen_range(0..4))
}

fn free_in_columns(g: &GridState, cols: std::ops::Range<usize>) -> Vec<(usize, usize)> {
    g.free_cells()
        .into_iter()
        .filter(|(c, _)| cols.contains(c))
        .collect()
}

fn door_key<R: Rng + ?Sized>(rng: &mut R, color: Color, with_door: bool) -> GridState {
    let n = GRID_SIZE;
    let mut g = GridState::walled(n, n);
    g.set(n - 2, n - 2, CellKind::Goal);
    let split = rng.gen_range(2..n - 2);
    for row in 0..n {
        g.set(split, row, CellKind::Wall);
    }
    let left = free_in_columns(&g, 1..split);
    g.agent_pos = pick(rng, &left);
    g.agent_dir = random_dir(rng);
    let door_row = rng.gen_range(1..n - 2);
    g.set(
        split,
        door_row,
        if with_door {
            CellKind::Door {
                color,
                open: false,
                locked: true,
            }
        } else {
            CellKind::Empty
        },
    );
    let key_cells: Vec<_> = left.into_iter().filter(|&p| p != g.agent_pos).collect();
    let (kc, kr) = pick(rng, &key_cells);
    g.set(kc, kr, CellKind::Key { color });
    g
}

fn lava_gap<R: Rng + ?Sized>(rng: &mut R) -> GridState {
    let n = GRID_SIZE;
    let mut g = GridState::walled(n, n);
    g.set(n - 2, n - 2, CellKind::Goal);
    let gap_col = rng.gen_range(2..n - 2);
    let gap_row = rng.gen_range(1..n - 1);
    for row in 1..n - 1 {
        if row != gap_row {
            g.set(gap_col, row, CellKind::Lava);
        }
    }
    g.agent_pos = (1, 1);
    g.agent_dir = Direction::East;
    g
}

fn empty_room() -> GridState {
    let n = GRID_SIZE;
    let mut g = GridState::walled(n, n);
    g.set(n - 2, n - 2, CellKind::Goal);
    g
}

fn fetch<R: Rng + ?Sized>(rng: &mut R) -> GridState {
    let n = GRID_SIZE;
    let mut g = GridState::walled(n, n);
    let mut colors = Color::ALL.to_vec();
    colors.shuffle(rng);
    let mut free = g.free_cells();
    free.shuffle(rng);
    for (color, (c, r)) in colors.iter().take(3).zip(free.iter()) {
        g.set(*c, *r, CellKind::Ball { color: *color });
    }
    g.fetch_target = Some(colors[rng.gen_range(0..3)]);
    let free = g.free_cells();
    g.agent_pos = pick(rng, &free);
    g.agent_dir = random_dir(rng);
    g
}

/// Initial layout for `kind`, drawn from the layout stream.
pub fn initial_state<R: Rng + ?Sized>(kind: VariantKind, rng: &mut R) -> GridState {
    match kind {
        VariantKind::DoorKeyDiffColor => door_key(rng, Color::Blue, true),
        VariantKind::DoorGone => door_key(rng, Color::Yellow, false),
        VariantKind::LavaGap => lava_gap(rng),
        VariantKind::Empty => empty_room(),
        VariantKind::Fetch => fetch(rng),
        _ => door_key(rng, Color::Yellow, true),
    }
}
