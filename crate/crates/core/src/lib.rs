//! Direct LEO-satellite-to-ground semantic transmission simulator with a
//! decision-assisted, critic-free policy-gradient trainer.
//!
//! Layering, bottom-up:
//!
//! | Module | Role |
//! |--------|------|
//! | [`orbits`] | constellation propagation, slant range, elevation, Doppler |
//! | [`channel`] | ideal/aged channel coefficients, downlink and ISL capacity |
//! | [`semantics`] | transmission modes, payload/compute/quality, diffusion kernels |
//! | [`scenario`] | task arrivals, weight grid, latency and semantic efficiency |
//! | [`env`] | the MDP: state encoding, feasibility masks, reward, rollout, slot oracle |
//! | [`reinforcepp`] | masked categorical policy, advantages, clipped surrogate, k2 penalty, trainer |
//! | [`experiment`] | configuration, checkpoints, baselines, evaluation, sweeps |

pub mod channel;
pub mod env;
mod error;
pub mod experiment;
pub mod orbits;
pub mod reinforcepp;
pub mod rng;
pub mod scenario;
pub mod semantics;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
