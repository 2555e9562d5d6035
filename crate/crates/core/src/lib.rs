//! Hierarchical self-maintenance for satellite-integrated community
//! networks: BGP update ingestion, windowed features, two-step anomaly
//! identification with root-cause localization, a flat one-shot baseline,
//! mitigation planning, and a synthetic network that produces labeled
//! update streams.

pub mod bgp;
pub mod classes;
pub mod experiment;
pub mod features;
pub mod hierarchy;
pub mod learners;
pub mod mitigation;
pub mod seed;
pub mod simnet;
