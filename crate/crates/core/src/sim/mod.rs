//! Monte Carlo experiment harness.

pub mod config;
pub mod experiment;
pub mod output;
pub mod stepsize;
pub mod trial;

pub use config::{ExperimentConfig, ExperimentKind, StepGrid};
pub use experiment::{run_experiment, CellResult, ExperimentResult, ReceiverResult};
pub use output::write_outputs;
pub use stepsize::optimize_step_sizes;
pub use trial::{channel_mse, generate_trial, run_receiver, run_trial, RunSettings, Scenario, TrialData, TrialMetrics};
