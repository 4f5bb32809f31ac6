//! Online conformal prediction with Bayesian-style beliefs over scores.
//!
//! A predictor keeps a belief mixing a fixed prior with the empirical score
//! distribution and answers every confidence level with a quantile of that
//! belief. Baselines (empirical risk minimization, online gradient descent)
//! share the same predict/update interface.

pub mod belief;
pub mod datagen;
pub mod error;
pub mod figures;
pub mod oracle;
pub mod predictor;
pub mod runner;
pub mod stream;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use predictor::{Algorithm, Predictor, PredictorConfig, PredictorRecord};
pub use types::{ConfidenceLevel, Prior, ScoreDomain};
