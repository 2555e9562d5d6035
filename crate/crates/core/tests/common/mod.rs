//! Shared generators and independent oracles for the integration suites.
#![allow(dead_code, clippy::needless_range_loop)]

pub mod features;
pub mod learners;
pub mod records;
pub mod snapshot;
