//! Config-driven batch runs over the interface-operator toolkit.

pub mod config;
pub mod run;

pub use config::{ConfigError, ExperimentConfig, Task};
pub use run::{execute, write_artifacts, Artifact, RunError, RunOutput};
