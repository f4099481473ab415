use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorVerdict, Method};
use crate::gridworld::{render_with_tile, Action, EnvVariant, GridState, Observation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Scripted,
    Random,
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PolicyKind::Scripted => "scripted",
            PolicyKind::Random => "random",
        })
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "scripted" => Ok(PolicyKind::Scripted),
            "random" => Ok(PolicyKind::Random),
            other => Err(crate::Error::Config(format!(
                "unknown policy `{other}` (expected scripted or random)"
            ))),
        }
    }
}

/// One observation of an episode. `action` is the action taken after seeing
/// it; the final observation of an episode has none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub state: GridState,
    pub action: Option<Action>,
    /// Reward returned by the transition into this observation.
    pub reward: f64,
    pub done: bool,
    /// Whether this observation carries the variant's novelty.
    pub novel: bool,
    /// Latent code fed to the recurrent context, when a model was attached.
    pub code: Option<usize>,
    pub verdicts: Vec<DetectorVerdict>,
}

impl StepRecord {
    pub fn verdict(&self, method: Method) -> Option<&DetectorVerdict> {
        self.verdicts.iter().find(|v| v.method == method)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub variant: EnvVariant,
    pub seed: u64,
    pub policy: PolicyKind,
    pub tile_size: usize,
    pub steps: Vec<StepRecord>,
    pub onset: Option<usize>,
    pub truncated: bool,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Observation at step `t`, re-rendered from the stored state.
    pub fn observation(&self, t: usize) -> Observation {
        render_with_tile(&self.steps[t].state, self.tile_size)
    }

    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        self.steps
            .iter()
            .map(move |s| render_with_tile(&s.state, self.tile_size))
    }

    /// Step indices flagged by `method`.
    pub fn flagged_steps(&self, method: Method) -> Vec<usize> {
        self.steps
            .iter()
            .filter(|s| s.verdict(method).is_some_and(|v| v.flag))
            .map(|s| s.t)
            .collect()
    }

    pub fn first_flag(&self, method: Method) -> Option<usize> {
        self.steps
            .iter()
            .find(|s| s.verdict(method).is_some_and(|v| v.flag))
            .map(|s| s.t)
    }
}
