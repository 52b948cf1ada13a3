//! Distance-preserving perturbation of numeric tables and two attacks that
//! recover private records from the release: one driven by a handful of
//! known records, one by an independent sample from the same distribution.

pub mod error;
pub mod harness;
pub mod known_input;
pub mod known_sample;
pub mod linalg;
pub mod metrics;
pub mod perturbation;

pub use error::{Error, Result};
