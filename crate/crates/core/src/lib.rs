//! Stochastic DC optimal power flow with automatic (AGC) and manual reserves.
//!
//! The crate builds sample-average models of three dispatch policies, solves
//! them with a bundled simplex and branch-and-bound engine, and evaluates the
//! resulting first-stage decisions on out-of-sample wind scenarios.

pub mod alsox;
pub mod cases;
pub mod error;
pub mod evaluator;
pub mod formulations;
pub mod grid;
pub mod pipeline;
pub mod scenarios;
pub mod solver;

pub use error::{Error, Result};
