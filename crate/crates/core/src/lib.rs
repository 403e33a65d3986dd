//! Bayesian risk-averse design of hub-and-spoke delivery networks.
//!
//! The crate fits conjugate posteriors to a historical operating panel,
//! draws posterior-predictive scenarios, enumerates candidate designs across
//! seven topology classes, evaluates every design under every scenario and
//! ranks them by a CVaR-based Bayes-risk score.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default) and sequentially otherwise; results are identical either way.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod designspace;
pub mod error;
pub mod evaluator;
pub mod experiments;
pub mod ingest;
pub mod matrix;
pub mod par;
pub mod pipeline;
pub mod posterior;
pub mod report;
pub mod risk;
pub mod rng;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
