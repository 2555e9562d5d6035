//! Class vocabulary shared by labeling, the two identification steps, the
//! flat baseline and the simulator's ground truth.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown class identifier {0:?}")]
pub struct UnknownClass(pub String);

/// Step 1 incident classes. `Other` (0) is the Step 1 negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncidentClass {
    CodeRedI,
    Nimda,
    Slammer,
}

impl IncidentClass {
    pub const ALL: [IncidentClass; 3] = [IncidentClass::CodeRedI, IncidentClass::Nimda, IncidentClass::Slammer];

    pub fn label(self) -> u32 {
        match self {
            IncidentClass::CodeRedI => 1,
            IncidentClass::Nimda => 2,
            IncidentClass::Slammer => 3,
        }
    }

    pub fn from_label(label: u32) -> Option<Self> {
        match label {
            1 => Some(IncidentClass::CodeRedI),
            2 => Some(IncidentClass::Nimda),
            3 => Some(IncidentClass::Slammer),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IncidentClass::CodeRedI => "code_red_i",
            IncidentClass::Nimda => "nimda",
            IncidentClass::Slammer => "slammer",
        }
    }
}

/// Step 2 fault classes. 0 is the Step 2 `normal` class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultClass {
    OutageR1R2,
    OutageR5R6,
}

impl FaultClass {
    pub const ALL: [FaultClass; 2] = [FaultClass::OutageR1R2, FaultClass::OutageR5R6];

    pub fn label(self) -> u32 {
        match self {
            FaultClass::OutageR1R2 => 1,
            FaultClass::OutageR5R6 => 2,
        }
    }

    pub fn from_label(label: u32) -> Option<Self> {
        match label {
            1 => Some(FaultClass::OutageR1R2),
            2 => Some(FaultClass::OutageR5R6),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultClass::OutageR1R2 => "outage_r1r2",
            FaultClass::OutageR5R6 => "outage_r5r6",
        }
    }

    /// Routers terminating the link this class localizes to.
    pub fn link_endpoints(self) -> (&'static str, &'static str) {
        match self {
            FaultClass::OutageR1R2 => ("R1", "R2"),
            FaultClass::OutageR5R6 => ("R5", "R6"),
        }
    }
}

/// The ground-truth condition of one time window. Serialized by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum WindowClass {
    Normal,
    Intrusion(IncidentClass),
    Outage(FaultClass),
}

/// Number of classes in the merged one-shot label space.
pub const FLAT_CLASS_COUNT: usize = 6;

impl WindowClass {
    /// Step 1 label: incident number, or 0 for everything else.
    pub fn step1_label(self) -> u32 {
        match self {
            WindowClass::Intrusion(c) => c.label(),
            _ => 0,
        }
    }

    /// Step 2 label, or `None` for windows Step 1 claims as intrusions.
    pub fn step2_label(self) -> Option<u32> {
        match self {
            WindowClass::Intrusion(_) => None,
            WindowClass::Normal => Some(0),
            WindowClass::Outage(f) => Some(f.label()),
        }
    }

    /// Label in the merged space: 0 normal, 1-3 incidents, 4-5 outages.
    pub fn flat_label(self) -> u32 {
        match self {
            WindowClass::Normal => 0,
            WindowClass::Intrusion(c) => c.label(),
            WindowClass::Outage(f) => 3 + f.label(),
        }
    }

    pub fn from_flat_label(label: u32) -> Option<Self> {
        match label {
            0 => Some(WindowClass::Normal),
            1..=3 => IncidentClass::from_label(label).map(WindowClass::Intrusion),
            4 | 5 => FaultClass::from_label(label - 3).map(WindowClass::Outage),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WindowClass::Normal => "normal",
            WindowClass::Intrusion(c) => c.name(),
            WindowClass::Outage(f) => f.name(),
        }
    }

    /// Labeling precedence: intrusion beats outage beats normal.
    pub fn tier(self) -> u8 {
        match self {
            WindowClass::Intrusion(_) => 2,
            WindowClass::Outage(_) => 1,
            WindowClass::Normal => 0,
        }
    }
}

impl fmt::Display for WindowClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<WindowClass> for String {
    fn from(c: WindowClass) -> Self {
        c.name().to_string()
    }
}

impl TryFrom<String> for WindowClass {
    type Error = UnknownClass;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl FromStr for WindowClass {
    type Err = UnknownClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let token = s.trim();
        if token == "normal" {
            return Ok(WindowClass::Normal);
        }
        for c in IncidentClass::ALL {
            if token == c.name() {
                return Ok(WindowClass::Intrusion(c));
            }
        }
        for f in FaultClass::ALL {
            if token == f.name() {
                return Ok(WindowClass::Outage(f));
            }
        }
        Err(UnknownClass(token.to_string()))
    }
}
