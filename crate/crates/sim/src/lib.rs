//! Monte-Carlo harness for multi-level heteroscedastic bandits: seeded
//! environments, a parallel runner, aggregate statistics and CSV/JSON
//! artifacts.

pub mod config;
pub mod env;
mod error;
pub mod online;
pub mod output;
pub mod report;
pub mod runner;

pub use config::{Algorithm, EnvironmentSpec, ExperimentConfig, NoiseConfig, ScheduleSpec, SigmaBar};
pub use error::{Result, SimError};
pub use report::AggregateReport;
pub use runner::{run_experiment, run_seed, ExperimentOutcome, ResolvedParams};
