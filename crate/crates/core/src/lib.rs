//! Simulation and analysis toolkit for testing continuous psi-epistemic
//! models with time-bin coherent states.
//!
//! * [`state_space`]: single-photon and coherent time-bin states, the
//!   overlap distance and its vacuum-projected variant.
//! * [`phase_model`]: laser phase diffusion and the Monte Carlo distance
//!   distribution with its quantile function.
//! * [`apparatus`]: pulse carving, attenuation and lossy first-click detection.
//! * [`ontic_models`]: finite ontic models and the overlap bounds.
//! * [`analysis`]: `epsilon_expt`, its expected value, and exclusion regions.
//! * [`io`], [`config`], [`cli`]: text formats, run configuration, commands.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod apparatus;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod ontic_models;
pub mod phase_model;
pub mod rng;
pub mod state_space;

pub use error::{Error, Result};
pub use rng::SeededRandomSource;
