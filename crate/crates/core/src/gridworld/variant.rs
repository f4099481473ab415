use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Catalogued environments. `Nominal` is the door-key 6x6 training task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantKind {
    Nominal,
    BrokenDoor,
    ActionFlip,
    Teleport,
    FakeGoal,
    DoorKeyDiffColor,
    DoorGone,
    KeyStuck,
    Fetch,
    LavaGap,
    Empty,
}

impl VariantKind {
    pub const ALL: [VariantKind; 11] = [
        VariantKind::Nominal,
        VariantKind::BrokenDoor,
        VariantKind::ActionFlip,
        VariantKind::Teleport,
        VariantKind::FakeGoal,
        VariantKind::DoorKeyDiffColor,
        VariantKind::DoorGone,
        VariantKind::KeyStuck,
        VariantKind::Fetch,
        VariantKind::LavaGap,
        VariantKind::Empty,
    ];

    pub fn id(self) -> &'static str {
        match self {
            VariantKind::Nominal => "nominal-doorkey-6x6",
            VariantKind::BrokenDoor => "broken-door",
            VariantKind::ActionFlip => "action-flip",
            VariantKind::Teleport => "teleport",
            VariantKind::FakeGoal => "fake-goal",
            VariantKind::DoorKeyDiffColor => "doorkey-diff-color",
            VariantKind::DoorGone => "door-gone",
            VariantKind::KeyStuck => "key-stuck",
            VariantKind::Fetch => "fetch",
            VariantKind::LavaGap => "lava-gap",
            VariantKind::Empty => "empty",
        }
    }

    /// Dynamics change with no visual cue.
    pub fn is_functional(self) -> bool {
        matches!(
            self,
            VariantKind::BrokenDoor
                | VariantKind::ActionFlip
                | VariantKind::Teleport
                | VariantKind::FakeGoal
                | VariantKind::KeyStuck
        )
    }

    /// Layout or colors differ from the nominal task.
    pub fn is_visual(self) -> bool {
        !self.is_functional() && self != VariantKind::Nominal
    }

    pub fn catalog() -> String {
        VariantKind::ALL
            .iter()
            .map(|v| v.id())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_lowercase();
        let alias = match wanted.as_str() {
            "nominal" | "doorkey" | "doorkey-6x6" => Some(VariantKind::Nominal),
            _ => None,
        };
        alias
            .or_else(|| VariantKind::ALL.into_iter().find(|v| v.id() == wanted))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown environment id `{s}`; catalog: {}",
                    VariantKind::catalog()
                ))
            })
    }
}

/// An environment variant plus the step from which its modified rule is live.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvVariant {
    pub kind: VariantKind,
    /// Environment step at which a functional change switches on (0 = from
    /// the start). Visual variants are always changed from the first frame.
    #[serde(default)]
    pub activation_step: u32,
}

impl EnvVariant {
    pub fn new(kind: VariantKind) -> Self {
        EnvVariant {
            kind,
            activation_step: 0,
        }
    }

    pub fn nominal() -> Self {
        Self::new(VariantKind::Nominal)
    }

    pub fn with_activation(kind: VariantKind, activation_step: u32) -> Result<Self> {
        if activation_step > 0 && !kind.is_functional() {
            return Err(Error::Config(format!(
                "{kind} cannot be delayed; only functional variants take an activation step"
            )));
        }
        Ok(EnvVariant {
            kind,
            activation_step,
        })
    }

    pub fn is_active(&self, step_count: u32) -> bool {
        self.kind.is_functional() && step_count >= self.activation_step
    }
}

impl From<VariantKind> for EnvVariant {
    fn from(kind: VariantKind) -> Self {
        EnvVariant::new(kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for v in VariantKind::ALL {
            assert_eq!(v.id().parse::<VariantKind>().unwrap(), v);
        }
    }

    #[test]
    fn unknown_id_lists_catalog() {
        let err = "moon-base".parse::<VariantKind>().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("broken-door"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn visual_variants_cannot_be_delayed() {
        assert!(EnvVariant::with_activation(VariantKind::LavaGap, 3).is_err());
        assert!(EnvVariant::with_activation(VariantKind::Teleport, 3).is_ok());
    }

    #[test]
    fn partition_is_exhaustive() {
        let functional = VariantKind::ALL
            .iter()
            .filter(|v| v.is_functional())
            .count();
        let visual = VariantKind::ALL.iter().filter(|v| v.is_visual()).count();
        assert_eq!(functional, 5);
        assert_eq!(visual, 5);
    }
}
