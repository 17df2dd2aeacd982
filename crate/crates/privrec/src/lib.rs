//! Privacy-preserving multimodal video recommendation.
//!
//! The crate implements a full desk-scale pipeline: weighted fusion of
//! visual/text/audio feature vectors, sigmoid interest matching, a
//! retrieve-then-rank top-k recommender with uniform (Laplace) or
//! importance-weighted score privatization, four recommendation
//! strategies, a client-side perturbation / server-side clustering flow,
//! and an epsilon-sweep evaluation harness with privacy accounting.
//!
//! Start with the runnable programs under `examples/`; each one walks
//! through a single capability. The `privrec` binary wraps the same
//! library behind `generate`, `train-weights`, `recommend`, `sweep`,
//! `localpipe`, and `validate` subcommands.

pub mod dp_noise;
pub mod error;
pub mod feature_store;
pub mod fusion;
pub mod local_privacy;
pub mod rng;
pub mod scoring;
pub mod strategies;
pub mod synth;

pub use error::{Error, Result};
