//! Core library for scoring how informative a sentence context is about a
//! designated target word, and for turning those scores into training
//! curricula for word-embedding models.
//!
//! The pipeline runs annotation aggregation → informativeness regression →
//! curriculum construction → embedding training → evaluation; each stage is
//! its own module and communicates through plain TSV artifacts, so stages
//! can also be driven individually or replaced by external tools.

pub mod annotation;
pub mod corpus;
pub mod curriculum;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod rng;
pub mod scorer;
pub mod synth;

pub use error::{Error, Result};
