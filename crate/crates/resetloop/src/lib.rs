//! Frequency-domain analysis and time-domain simulation of closed-loop
//! reset feedback control systems.
//!
//! A reset controller is a linear time-invariant (LTI) controller augmented
//! with a state jump rule: whenever a designated trigger signal crosses zero,
//! part of the controller state is instantaneously scaled. The classical
//! example is the Clegg integrator, an integrator whose state is reset
//! toward zero at every zero crossing of its input. Reset action buys phase
//! lead that no LTI controller of the same magnitude profile can provide,
//! at the price of nonlinearity: harmonics, possible limit cycles, and a
//! frequency-dependent change in how often the element actually resets.
//!
//! This crate provides the analysis chain needed to design and validate such
//! loops without resorting to brute-force simulation for every question:
//!
//! - [`linsys`] — minimal LTI toolbox: polynomials, rational transfer
//!   functions, state-space models, matrix exponentials, impulse responses,
//!   and Tustin discretization.
//! - [`reset_core`] — the reset element itself, its base-linear dynamics,
//!   the loop topology connecting it to shaping filters and the plant, and
//!   open-loop stability checks for the flow/jump pair.
//! - [`sidf`] — sinusoidal-input describing functions: first-order-harmonic
//!   frequency responses of the reset element and of the full loop, plus
//!   gain-crossover/phase-margin extraction.
//! - [`multireset`] — detection of frequency bands in which the element
//!   resets more than twice per steady-state cycle, via an exact
//!   zero-crossing test on a closed-form inter-reset error profile.
//! - [`harmonics`] — high-order harmonic magnitudes of the closed loop,
//!   the harmonic ratio used to size shaping filters, and spectral
//!   decomposition of simulated traces.
//! - [`simulator`] — a discrete-time hybrid simulator of the full loop,
//!   used as the ground-truth oracle for every frequency-domain claim:
//!   steady-state error metrics, reset counting, boundary searches, step
//!   responses, and limit-cycle detection.
//! - [`shaping`] — design and validation of the shaping filter placed on
//!   the reset trigger path, including the closed-form phase predictions
//!   that motivate it.
//! - [`presets`] — ready-made loop configurations: a lightly damped
//!   second-order plant under PID-like and reset-augmented controllers,
//!   and the six benchmark variants used by the validation suite.
//!
//! # Conventions
//!
//! - Polynomials store coefficients in ascending powers: `[a0, a1, a2]`
//!   is `a0 + a1 s + a2 s^2`.
//! - Frequencies passed to evaluation routines are angular (rad/s) unless
//!   a name says `hz`.
//! - Angles returned by analysis routines are radians unless a name says
//!   `deg`.
//! - All numerics are `f64`; determinism is part of the contract. Any
//!   stochastic ingredient (simulation noise, dither) is driven by a
//!   seedable generator and defaults to a fixed seed.

#![warn(missing_docs)]

pub mod error;
pub mod harmonics;
pub mod linsys;
pub mod multireset;
pub mod presets;
pub mod reset_core;
pub mod sidf;
pub mod shaping;
pub mod simulator;

pub use error::{Error, Result};
