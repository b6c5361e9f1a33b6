//! Experiment harness: configuration, curriculum and scaling runs, and
//! their CSV outputs.

pub mod config;
pub mod curriculum;
pub mod scaling;
pub mod output;
pub mod stats;

pub use config::ExperimentConfig;
pub use curriculum::{run_curriculum, run_experiment, RunMetrics, Strategy, TaskMetrics};
pub use scaling::{scaling_study, ScalingRecord};
