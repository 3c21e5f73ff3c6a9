//! Lookahead-minmax and baseline game optimizers on analytic two-player
//! testbeds, with spectral tools for the linearized update operators and an
//! experiment harness that logs distance-to-optimum trajectories.

pub mod error;
pub mod harness;
pub mod lookahead;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
