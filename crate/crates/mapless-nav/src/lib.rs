//! Mapless-navigation benchmark: trains deterministic (DDPG) and stochastic
//! (SAC) actor-critic agents to steer a kinematic aerial vehicle toward
//! randomly placed goals using only downsampled lidar ranges and relative
//! goal coordinates, then evaluates the trained policies on goal-oriented
//! and waypoint navigation tasks.
//!
//! Layout:
//! - [`nn`] — minimal differentiable-network engine (f64 throughout)
//! - [`env`] — walled 10×10×6 m scenarios, ray-cast lidar, reward/termination
//! - [`agents`] — replay buffer, OU noise, DDPG and SAC update rules
//! - [`arch`] — the six actor structures and the fixed 3×512 critic
//! - [`train`] / [`eval`] — episode loop and 100-trial evaluation protocols
//! - [`report`] / [`plot`] — CSV/text tables and SVG charts
//! - [`config`] / [`cli`] — flat key-value configs and the command-line surface

pub mod agents;
pub mod arch;
pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod nn;
pub mod par;
pub mod plot;
pub mod report;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
