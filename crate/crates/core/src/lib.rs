//! Predicting anti-epileptic drug resistance from patient event streams.
//!
//! The crate covers the whole batch pipeline: synthetic event generation,
//! case/control cohort construction, count featurization, dimensionality
//! reduction, unsupervised clustering checks, supervised classifiers and
//! their evaluation.

pub mod error;
pub mod par;
pub mod linalg;
pub mod data;
pub mod cohort;
pub mod featurize;
pub mod reduce;
pub mod classify;
pub mod cli;
pub mod cluster;
pub mod eval;
pub mod pipeline;

pub use error::{Error, Result};
