//! Monte Carlo harness for step-frequency compressive-sensing MIMO radar:
//! experiment configs, trial execution, occurrence maps and run artifacts.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod report;

pub use config::ExperimentConfig;
pub use error::HarnessError;
pub use experiment::{Experiment, OccurrenceMap, RunOutcome, TrialRecord};
