//! Adaptive selection of intrinsic rewards for actor-critic agents.

pub mod agent;
pub mod bandit;
pub mod config;
pub mod batch;
pub mod encoder;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod metrics;
pub mod neural;
pub mod oracle;
pub mod rewards;
pub mod rng;

pub use batch::RolloutBatch;
pub use error::{Error, Result};
