//! Synthetic satellite-integrated community network: a validated topology
//! graph, scripted anomaly scenarios, and a deterministic generator of
//! labeled BGP update streams.

mod generate;
mod scenario;
mod topology;

use thiserror::Error;

pub use generate::generate_stream;
pub use scenario::{
    worm_defaults, GenConfig, Scenario, ScenarioEvent, DEFAULT_ANNOUNCE_RATE, DEFAULT_FADE_ONSET,
    DEFAULT_OUTAGE_MULTIPLIER, DEFAULT_PROPAGATION_DELAY, DEFAULT_WITHDRAW_RATE,
};
pub use topology::{
    reachable_prefixes, Endpoint, Link, Medium, Network, NetworkRole, NodeKind, Router, Topology, TopologyDocument,
    TopologyError,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario document: {0}")]
    Parse(String),
    #[error("generator config: {0}")]
    Config(String),
    #[error("event {index}: {reason}")]
    Event { index: usize, reason: String },
    #[error("event {index}: worm event carries no incident class")]
    WormWithoutClass { index: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
