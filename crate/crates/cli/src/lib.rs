//! Experiment harness for the `weighted-gibbs` sampler.
//!
//! A config file names one experiment (Gaussian autocorrelation, Ising
//! denoising, LDA topic recovery, or the validation suites). Running it
//! builds the model once and runs each listed scan order against it from the
//! same seed, writing one output directory per scheduler.

pub mod compare;
pub mod config;
mod error;
pub mod experiments;
pub mod output;

pub use config::{ExperimentConfig, ExperimentKind, SchedulerKind};
pub use error::{CliError, CliResult};
pub use experiments::run_experiment;
