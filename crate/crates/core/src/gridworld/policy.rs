//! Agent surrogates: a breadth-first planner standing in for a trained
//! policy and a uniform random policy standing in for an untrained one.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::Rng;

use super::dynamics::nominal_step;
use super::grid::{Action, GridState};

/// Actions the planner expands, in tie-breaking order. Drop and done never
/// shorten a path in these layouts.
const PLAN_ACTIONS: [Action; 5] = [
    Action::TurnLeft,
    Action::TurnRight,
    Action::Forward,
    Action::Pickup,
    Action::Toggle,
];

const PLAN_HORIZON: u32 = 1000;

/// First action of a shortest rewarded action sequence under nominal
/// dynamics, ties broken by action order. Returns `Done` when no rewarded
/// state is reachable.
pub fn scripted_policy(state: &GridState) -> Action {
    shortest_plan(state)
        .and_then(|p| p.first().copied())
        .unwrap_or(Action::Done)
}

/// Full shortest plan, if any.
pub fn shortest_plan(state: &GridState) -> Option<Vec<Action>> {
    let start = state.without_clock();
    let mut parents: HashMap<GridState, (GridState, Action)> = HashMap::new();
    let mut seen: HashSet<GridState> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start.clone());

    while let Some(s) = queue.pop_front() {
        for action in PLAN_ACTIONS {
            let (next, reward, done) = nominal_step(&s, action, PLAN_HORIZON);
            if done {
                if reward > 0.0 {
                    let mut plan = vec![action];
                    let mut cur = s.clone();
                    while let Some((prev, a)) = parents.get(&cur) {
                        plan.push(*a);
                        cur = prev.clone();
                    }
                    plan.reverse();
                    return Some(plan);
                }
                continue;
            }
            let key = next.without_clock();
            if seen.insert(key.clone()) {
                parents.insert(key.clone(), (s.clone(), action));
                queue.push_back(key);
            }
        }
    }
    None
}

/// Memoizing wrapper around [`scripted_policy`]. The cache only stores the
/// pure function's values, so results never depend on call history.
#[derive(Debug, Default, Clone)]
pub struct ScriptedPolicy {
    cache: HashMap<GridState, Action>,
}

impl ScriptedPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn act(&mut self, state: &GridState) -> Action {
        let key = state.without_clock();
        if let Some(a) = self.cache.get(&key) {
            return *a;
        }
        let a = scripted_policy(state);
        self.cache.insert(key, a);
        a
    }
}

pub fn random_policy<R: Rng + ?Sized>(rng: &mut R) -> Action {
    Action::ALL[rng.gen_range(0..Action::COUNT)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::env::make_env;
    use crate::gridworld::grid::{CellKind, Color, Direction, Item};
    use crate::gridworld::variant::VariantKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn picks_up_facing_key() {
        let mut g = GridState::walled(6, 6);
        g.set(
            2,
            1,
            CellKind::Key {
                color: Color::Yellow,
            },
        );
        g.set(3, 1, CellKind::Wall);
        g.set(3, 2, CellKind::Wall);
        g.set(
            3,
            3,
            CellKind::Door {
                color: Color::Yellow,
                open: false,
                locked: true,
            },
        );
        g.set(3, 4, CellKind::Wall);
        g.set(4, 4, CellKind::Goal);
        g.agent_pos = (1, 1);
        g.agent_dir = Direction::East;
        assert_eq!(scripted_policy(&g), Action::Pickup);

        g.set(2, 1, CellKind::Empty);
        g.carrying = Some(Item::Key(Color::Yellow));
        g.agent_pos = (2, 3);
        assert_eq!(scripted_policy(&g), Action::Toggle);
    }

    #[test]
    fn unreachable_goal_gives_done() {
        let g = GridState::walled(6, 6);
        assert_eq!(scripted_policy(&g), Action::Done);
    }

    #[test]
    fn random_policy_is_roughly_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut hist = [0usize; 7];
        for _ in 0..70_000 {
            hist[random_policy(&mut rng).index()] += 1;
        }
        for h in hist {
            let f = h as f64 / 70_000.0;
            assert!((0.13..=0.16).contains(&f), "{f}");
        }
        let a: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(3);
            (0..20).map(|_| random_policy(&mut r)).collect()
        };
        let b: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(3);
            (0..20).map(|_| random_policy(&mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn cached_policy_matches_pure_policy() {
        let mut cached = ScriptedPolicy::new();
        for seed in 0..20 {
            let mut env = make_env(VariantKind::Nominal, seed);
            while !env.is_finished() {
                let a = cached.act(env.state());
                assert_eq!(a, scripted_policy(env.state()));
                env.step(a);
            }
        }
    }

    /// Shortest number of actions to any rewarded terminal transition, by
    /// exhaustive breadth-first search over all seven actions.
    fn brute_force_shortest(start: &GridState) -> usize {
        let mut frontier = vec![start.without_clock()];
        let mut seen: HashSet<GridState> = frontier.iter().cloned().collect();
        for depth in 1..60 {
            let mut next_frontier = Vec::new();
            for s in &frontier {
                for a in Action::ALL {
                    let (n, r, done) = nominal_step(s, a, 1000);
                    if done && r > 0.0 {
                        return depth;
                    }
                    if !done && seen.insert(n.without_clock()) {
                        next_frontier.push(n.without_clock());
                    }
                }
            }
            frontier = next_frontier;
        }
        panic!("no rewarded path");
    }

    #[test]
    fn nominal_episode_is_minimal() {
        for seed in [0u64, 7, 19, 42] {
            let mut env = make_env(VariantKind::Nominal, seed);
            let optimum = brute_force_shortest(env.state());
            let mut steps = 0;
            let mut reached = false;
            while !env.is_finished() {
                let a = scripted_policy(env.state());
                let out = env.step(a);
                steps += 1;
                reached = out.reward.reward > 0.0;
            }
            assert!(reached, "seed {seed}");
            assert_eq!(steps, optimum, "seed {seed}");
        }
    }
}
