//! Multi-objective recommendation pipeline.
//!
//! Three stages: an item-based collaborative filter produces a per-user
//! top-k candidate list ([`ratings`]); a family of hybrid optimizers
//! searches for top-s sublists that trade off accuracy against diversity
//! ([`algorithms`], built on [`objectives`], [`pareto`], and [`operators`]);
//! and an evaluation layer scores the resulting frontiers and picks the
//! final list ([`evaluation`]).
//!
//! Everything stochastic takes an explicit seeded generator from [`rng`],
//! so runs are reproducible end to end.

pub mod algorithms;
pub mod error;
pub mod evaluation;
pub mod objectives;
pub mod operators;
pub mod pareto;
pub mod ratings;
pub mod rng;
pub mod testkit;

pub use error::{Error, Result};
