//! Batch runs over the registered market environments: configuration
//! files, episode logs and a tabular Q-learning baseline.

pub mod config;
pub mod error;
pub mod logs;
pub mod policy;
pub mod qlearn;
pub mod runner;
pub mod stats;

pub use config::{PolicySpec, RunConfig};
pub use error::HarnessError;
pub use runner::{run_episodes, EpisodeLog, SeedRun};
