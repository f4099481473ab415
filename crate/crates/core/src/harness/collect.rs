use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use rayon::prelude::*;

use super::seeds::{derive_rng, derive_seed};
use super::trace::{EpisodeTrace, PolicyKind, StepRecord};
use crate::error::Result;
use crate::gridworld::{
    novelty_onset, random_policy, Action, EnvConfig, EnvVariant, Environment, GridState,
    ScriptedPolicy,
};

const BATCH: usize = 32;

/// Per-episode action source.
pub(crate) enum Agent<R: Rng> {
    Scripted(ScriptedPolicy),
    Random(R),
}

impl<R: Rng> Agent<R> {
    pub(crate) fn new(policy: PolicyKind, rng: R) -> Self {
        match policy {
            PolicyKind::Scripted => Agent::Scripted(ScriptedPolicy::new()),
            PolicyKind::Random => Agent::Random(rng),
        }
    }

    pub(crate) fn act(&mut self, state: &GridState) -> Action {
        match self {
            Agent::Scripted(p) => p.act(state),
            Agent::Random(rng) => random_policy(rng),
        }
    }
}

/// Plays one episode without any model attached.
pub fn record_episode(
    variant: EnvVariant,
    policy: PolicyKind,
    seed: u64,
    config: EnvConfig,
) -> EpisodeTrace {
    let mut env = Environment::new(variant, seed, config);
    let mut agent = Agent::new(policy, derive_rng(seed, "policy", 0));
    let mut steps = Vec::new();
    let mut reward = 0.0;
    let mut done = false;
    let mut truncated = false;
    loop {
        let t = steps.len();
        let action = (!env.is_finished()).then(|| agent.act(env.state()));
        steps.push(StepRecord {
            t,
            state: env.state().clone(),
            action,
            reward,
            done,
            novel: env.novel_now(),
            code: None,
            verdicts: Vec::new(),
        });
        let Some(a) = action else { break };
        let out = env.step(a);
        reward = out.reward.reward;
        done = out.reward.done;
        truncated = out.truncated;
    }
    finish_trace(variant, seed, policy, config.tile_size, steps, truncated)
}

pub(crate) fn finish_trace(
    variant: EnvVariant,
    seed: u64,
    policy: PolicyKind,
    tile_size: usize,
    steps: Vec<StepRecord>,
    truncated: bool,
) -> EpisodeTrace {
    let mut trace = EpisodeTrace {
        variant,
        seed,
        policy,
        tile_size,
        steps,
        onset: None,
        truncated,
    };
    trace.onset = novelty_onset(&trace, &variant);
    trace
}

/// Cuts a trace to its first `len` steps.
pub fn truncate_trace(trace: &mut EpisodeTrace, len: usize) {
    if len >= trace.steps.len() {
        return;
    }
    trace.steps.truncate(len);
    trace.truncated = true;
    trace.onset = novelty_onset(trace, &trace.variant);
}

/// Runs episodes `0, 1, 2, ...` in parallel batches until `budget` steps
/// are gathered; the last episode is cut to fit exactly. Results are in
/// episode order regardless of scheduling.
pub(crate) fn run_until_budget<F>(budget: usize, episode: F) -> Result<Vec<EpisodeTrace>>
where
    F: Fn(u64) -> Result<EpisodeTrace> + Sync,
{
    let mut out: Vec<EpisodeTrace> = Vec::new();
    let mut total = 0usize;
    let mut next = 0u64;
    while total < budget {
        let batch: Vec<EpisodeTrace> = (next..next + BATCH as u64)
            .into_par_iter()
            .map(&episode)
            .collect::<Result<_>>()?;
        next += BATCH as u64;
        for mut trace in batch {
            if total >= budget {
                break;
            }
            let room = budget - total;
            truncate_trace(&mut trace, room);
            total += trace.len();
            out.push(trace);
        }
    }
    Ok(out)
}

pub fn episode_seed(root: u64, variant: &EnvVariant, policy: PolicyKind, index: u64) -> u64 {
    derive_seed(root, &format!("collect/{}/{policy}", variant.kind), index)
}

/// `episodes` complete episodes seeded from `seed`.
pub fn collect(
    variant: EnvVariant,
    policy: PolicyKind,
    episodes: usize,
    seed: u64,
) -> ReplayBuffer {
    let config = EnvConfig::default();
    let traces: Vec<EpisodeTrace> = (0..episodes as u64)
        .into_par_iter()
        .map(|i| {
            record_episode(
                variant,
                policy,
                episode_seed(seed, &variant, policy, i),
                config,
            )
        })
        .collect();
    let mut buffer = ReplayBuffer::unbounded();
    for t in traces {
        buffer.push(t);
    }
    buffer
}

/// Episodes totalling exactly `steps` observations.
pub fn collect_steps(
    variant: EnvVariant,
    policy: PolicyKind,
    steps: usize,
    seed: u64,
    config: EnvConfig,
) -> Vec<EpisodeTrace> {
    run_until_budget(steps, |i| {
        Ok(record_episode(
            variant,
            policy,
            episode_seed(seed, &variant, policy, i),
            config,
        ))
    })
    .expect("model-free episodes cannot fail")
}

/// Episode store partitioned by (variant, policy), each partition bounded
/// in steps and evicting its oldest episodes first.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer {
    capacity_steps: usize,
    partitions: BTreeMap<(EnvVariantKey, PolicyKind), VecDeque<EpisodeTrace>>,
}

/// Orderable stand-in for an [`EnvVariant`].
pub type EnvVariantKey = (crate::gridworld::VariantKind, u32);

fn key(v: &EnvVariant) -> EnvVariantKey {
    (v.kind, v.activation_step)
}

impl ReplayBuffer {
    pub fn new(capacity_steps: usize) -> Self {
        ReplayBuffer {
            capacity_steps,
            partitions: BTreeMap::new(),
        }
    }

    pub fn unbounded() -> Self {
        Self::new(usize::MAX)
    }

    pub fn push(&mut self, trace: EpisodeTrace) {
        let part = self
            .partitions
            .entry((key(&trace.variant), trace.policy))
            .or_default();
        part.push_back(trace);
        let mut total: usize = part.iter().map(EpisodeTrace::len).sum();
        while total > self.capacity_steps && part.len() > 1 {
            total -= part.pop_front().map_or(0, |t| t.len());
        }
    }

    pub fn partition(&self, variant: &EnvVariant, policy: PolicyKind) -> Vec<&EpisodeTrace> {
        self.partitions
            .get(&(key(variant), policy))
            .map(|p| p.iter().collect())
            .unwrap_or_default()
    }

    pub fn steps(&self, variant: &EnvVariant, policy: PolicyKind) -> usize {
        self.partition(variant, policy)
            .iter()
            .map(|t| t.len())
            .sum()
    }

    pub fn total_steps(&self) -> usize {
        self.partitions
            .values()
            .flat_map(|p| p.iter())
            .map(EpisodeTrace::len)
            .sum()
    }

    pub fn traces(&self) -> impl Iterator<Item = &EpisodeTrace> {
        self.partitions.values().flat_map(|p| p.iter())
    }

    pub fn into_traces(self) -> Vec<EpisodeTrace> {
        self.partitions
            .into_values()
            .flat_map(|p| p.into_iter())
            .collect()
    }
}
