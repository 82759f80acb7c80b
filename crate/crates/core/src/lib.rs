//! Markov-modulated duplication-deletion random graphs.
//!
//! * [`graph`]: the dynamic graph and its duplication/deletion kernels.
//! * [`chain`]: the slow modulating Markov chain.
//! * [`theory`]: expected-degree generator, stationary distribution,
//!   covariance, searchability and power-law exponent.
//! * [`tracker`]: noisy observations and the constant step-size tracker.
//! * [`experiments`]: run configs, scenarios and result files.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the simulations and the CLI use.

pub mod chain;
pub mod distribution;
pub mod experiments;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod scalar;
pub mod theory;
pub mod tracker;

pub use distribution::DegreeDistribution;
pub use error::{Error, Result};
pub use graph::{evolve_step, DynamicGraph, GraphParams, NodeId, StepOutcome};
pub use scalar::Scalar;

pub type Distribution = DegreeDistribution<f64>;
pub type Distribution32 = DegreeDistribution<f32>;
pub type Matrix = linalg::Matrix<f64>;
pub type Chain = chain::ThetaChain<f64>;
pub type Solution = theory::TheorySolution<f64>;
pub type Solution32 = theory::TheorySolution<f32>;
pub type Tracker = tracker::TrackerState<f64>;
pub type Series = tracker::ErrorSeries<f64>;
