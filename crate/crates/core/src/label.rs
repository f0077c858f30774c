use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Four-way impact class. The integer encoding is fixed and shared by every
/// file format and wire message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ImpactLabel {
    Bow = 0,
    Port = 1,
    Starboard = 2,
    None = 3,
}

impl ImpactLabel {
    pub const COUNT: usize = 4;
    pub const ALL: [ImpactLabel; 4] = [Self::Bow, Self::Port, Self::Starboard, Self::None];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Bow => "Bow",
            Self::Port => "Port",
            Self::Starboard => "Starboard",
            Self::None => "None",
        }
    }

    pub fn is_impact(self) -> bool {
        self != Self::None
    }
}

impl fmt::Display for ImpactLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown impact label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for ImpactLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}
