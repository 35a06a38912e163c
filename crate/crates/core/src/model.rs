//! Shared vocabulary: model identifiers and cube channels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::LabError;
use crate::photon::OntologyMode;

/// A cube port. `Trans` is the transmission channel (`1`), `Refl` the
/// reflection channel (`0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Channel {
    Refl = 0,
    Trans = 1,
}

impl Channel {
    pub const BOTH: [Channel; 2] = [Channel::Trans, Channel::Refl];

    pub fn bit(self) -> u8 {
        self as u8
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Channel::Trans
        } else {
            Channel::Refl
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Channel::Trans => Channel::Refl,
            Channel::Refl => Channel::Trans,
        }
    }
}

impl From<Channel> for u8 {
    fn from(c: Channel) -> u8 {
        c.bit()
    }
}

impl TryFrom<u8> for Channel {
    type Error = LabError;

    fn try_from(v: u8) -> Result<Self, LabError> {
        match v {
            0 => Ok(Channel::Refl),
            1 => Ok(Channel::Trans),
            _ => Err(LabError::InvalidInput(format!(
                "channel must be 0 or 1, got {v}"
            ))),
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bit())
    }
}

/// Built-in model configurations, by their command-line names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ModelId {
    /// Two-bit hidden variable over (past channel, future channel).
    TwoBit,
    /// One-bit parity hidden variable.
    OneBit,
    /// Time-symmetric photon with beables on both sides.
    QmDiscrete,
    /// Textbook projection-postulate photon.
    QmCollapse,
    /// Branching photon, no definite output.
    QmNoCollapse,
    /// Classical fields fed by a Demon.
    Classical,
}

impl ModelId {
    pub const ALL: [ModelId; 6] = [
        ModelId::TwoBit,
        ModelId::OneBit,
        ModelId::QmDiscrete,
        ModelId::QmCollapse,
        ModelId::QmNoCollapse,
        ModelId::Classical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::TwoBit => "twobit",
            ModelId::OneBit => "onebit",
            ModelId::QmDiscrete => "qm-discrete",
            ModelId::QmCollapse => "qm-collapse",
            ModelId::QmNoCollapse => "qm-nocollapse",
            ModelId::Classical => "classical",
        }
    }

    /// The photon ontology behind a `qm-*` model.
    pub fn ontology(self) -> Option<OntologyMode> {
        match self {
            ModelId::QmDiscrete => Some(OntologyMode::DiscreteSymmetric),
            ModelId::QmCollapse => Some(OntologyMode::Collapse),
            ModelId::QmNoCollapse => Some(OntologyMode::NoCollapse),
            _ => None,
        }
    }

    /// Whether simulated records carry definite input and output channels.
    pub fn has_channels(self) -> bool {
        !matches!(self, ModelId::Classical)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, LabError> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = ModelId::ALL.iter().map(|m| m.name()).collect();
                LabError::Config(format!("unknown model '{s}' (known: {})", known.join(", ")))
            })
    }
}

impl From<ModelId> for String {
    fn from(m: ModelId) -> String {
        m.name().to_string()
    }
}

impl TryFrom<String> for ModelId {
    type Error = LabError;

    fn try_from(s: String) -> Result<Self, LabError> {
        s.parse()
    }
}
