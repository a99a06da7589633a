//! Single-site Gibbs sampling with pluggable scan orders.
//!
//! The chain runner in [`engine`] drives any [`GibbsModel`] under any
//! [`Scheduler`]. Three schedulers are provided: the deterministic
//! systematic scan, the uniform random scan, and an adaptive weighted scan
//! that selects variable `i` with probability proportional to
//! `sqrt(d_i) + lambda`, where `d_i` is twice the running estimate of the
//! variable's marginal variance.
//!
//! Variable indices are zero-based throughout the crate.
//!
//! [`validation`] holds exact finite-state checks of the stationarity and
//! optimality results the weighted scan rests on, [`diagnostics`] the
//! measurements (autocorrelation, ESS, jump distances, PCA, reconstruction
//! error, topic-model likelihoods), and [`models`] the Gaussian, Ising and
//! LDA targets used by the experiments.

pub mod diagnostics;
pub mod engine;
mod error;
pub mod models;
pub mod schedulers;
pub mod validation;

pub use engine::{
    run_chain, run_chain_observed, step, ChainConfig, ChainTrace, GibbsModel, StateVector,
    SummaryKind,
};
pub use error::{Error, Result};
pub use schedulers::{
    compute_weights, Lambda, Scheduler, SelectionWeights, SystematicScheduler, UniformScheduler,
    VarianceAccumulator, WeightedScheduler, WeightedSchedulerConfig,
};
