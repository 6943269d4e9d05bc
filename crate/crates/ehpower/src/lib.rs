//! Online power control for an energy-harvesting transmitter with a finite
//! battery.
//!
//! A transmitter harvests random i.i.d. energy `E_t` into a battery of
//! capacity `bbar` and spends `g_t <= b_t` per slot for a rate of
//! `0.5*log2(1 + gamma*g_t)` bits. This crate provides:
//!
//! - [`dist`]: arrival models, clipped statistics, reproducible sampling and
//!   mean-preserving quantization;
//! - [`policy`]: the Fixed Fraction, greedy, constant, optimal-Bernoulli and
//!   tabular policies, plus the closed-form KKT allocation solver;
//! - [`analytic`]: exact throughputs and the universal additive
//!   (`0.5/ln 2` bits) and multiplicative (factor 1/2) bounds;
//! - [`mdp`]: relative value iteration on a quantized battery grid;
//! - [`sim`]: a seeded Monte Carlo engine and an exact small-horizon
//!   enumerator.
//!
//! The headline fact the pieces cross-validate: spending the fixed fraction
//! `q = mu/bbar` of the battery each slot is near-optimal for every i.i.d.
//! arrival process, within `0.5/ln 2` bits and a factor of two of the
//! optimum, where `mu` is the clipped mean arrival.

pub mod analytic;
pub mod dist;
mod error;
pub mod mdp;
pub mod policy;
pub mod sim;

pub use error::{Error, Result};
