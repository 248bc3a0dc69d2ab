//! Desk-scale laboratory for adaptive gradient optimizers built around
//! asynchronous preconditioning and second-momentum centering.
//!
//! The crate implements:
//!
//! - [`optim`]: seven optimizer update rules (SGDM, RMSProp, Adam, AMSGrad,
//!   AdaBelief, AdaShift, ACProp) as pure step functions with box projection.
//! - [`problems`]: gradient oracles for the adversarial online problems
//!   (periodic, stochastic and sparse counterexamples) plus smooth test
//!   functions.
//! - [`limits`]: closed-form limits of the EMA accumulators on the periodic
//!   problems, with an independent simulation oracle.
//! - [`sweep`]: convergence-region sweeps over (P, beta2, learning rate).
//! - [`mlp`]: a tiny two-layer MLP trained by manual backprop, used to track
//!   denominator statistics.
//! - [`series`]: Riemann zeta on (0,1) and the generalized harmonic sum
//!   accuracy check.
//! - [`rate`]: empirical convergence-rate measurement on a noisy quadratic.
//! - [`report`] and [`svg`]: CSV/JSON artifacts and deterministic SVG
//!   rendering for the command line front end.

pub mod kahan;
pub mod limits;
pub mod mlp;
pub mod optim;
pub mod problems;
pub mod rate;
pub mod report;
pub mod rng;
pub mod series;
pub mod svg;
pub mod sweep;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite gradient component at index {0}")]
    NonFiniteGradient(usize),
    #[error("non-finite parameter after step {0}")]
    NonFiniteState(u64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Schema version stamped into every CSV/JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;
