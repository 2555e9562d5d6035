use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::classes::IncidentClass;

pub const DEFAULT_ANNOUNCE_RATE: f64 = 0.5;
pub const DEFAULT_WITHDRAW_RATE: f64 = 0.02;
pub const DEFAULT_PROPAGATION_DELAY: f64 = 5.0;
pub const DEFAULT_OUTAGE_MULTIPLIER: f64 = 10.0;
pub const DEFAULT_FADE_ONSET: f64 = 30.0;

/// Baseline churn per monitored peer and the generator seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    /// Announcements per second per peer.
    pub announce_rate: f64,
    /// Withdraw/re-announce pairs per second per peer.
    pub withdraw_rate: f64,
    /// Seconds within which a topology change reaches every peer.
    pub propagation_delay: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            announce_rate: DEFAULT_ANNOUNCE_RATE,
            withdraw_rate: DEFAULT_WITHDRAW_RATE,
            propagation_delay: DEFAULT_PROPAGATION_DELAY,
            seed: 0,
        }
    }
}

/// Worm burst defaults per incident: announcement-rate multiplier, share of
/// announcements with a randomized path, withdrawal-rate multiplier.
pub fn worm_defaults(class: IncidentClass) -> (f64, f64, f64) {
    match class {
        IncidentClass::CodeRedI => (3.0, 0.3, 2.0),
        IncidentClass::Nimda => (5.0, 0.5, 4.0),
        IncidentClass::Slammer => (8.0, 0.8, 8.0),
    }
}

/// A scripted anomaly over `[start, end)` epoch seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioEvent {
    LinkOutage {
        link: String,
        start: u64,
        end: u64,
        /// Withdrawal-storm rate per affected (peer, prefix), as a multiple
        /// of the baseline withdrawal rate.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        multiplier: Option<f64>,
    },
    Worm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        class: Option<u32>,
        start: u64,
        end: u64,
        /// Affected peers; empty means all monitored peers.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        peers: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        multiplier: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        churn: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        withdraw_multiplier: Option<f64>,
    },
    WeatherFade {
        link: String,
        start: u64,
        end: u64,
        /// Seconds over which the fade takes routes down.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        onset: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        multiplier: Option<f64>,
    },
}

impl ScenarioEvent {
    pub fn span(&self) -> (u64, u64) {
        match self {
            ScenarioEvent::LinkOutage { start, end, .. }
            | ScenarioEvent::Worm { start, end, .. }
            | ScenarioEvent::WeatherFade { start, end, .. } => (*start, *end),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioEvent::LinkOutage { .. } => "link_outage",
            ScenarioEvent::Worm { .. } => "worm",
            ScenarioEvent::WeatherFade { .. } => "weather_fade",
        }
    }
}

/// Simulation horizon `[start, start + duration)`, churn settings and events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub start: u64,
    pub duration: u64,
    #[serde(default)]
    pub gen: GenConfig,
    #[serde(default)]
    pub events: Vec<ScenarioEvent>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))
    }

    /// Loads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn end(&self) -> u64 {
        self.start + self.duration
    }
}
