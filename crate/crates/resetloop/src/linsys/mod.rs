//! Foundational LTI numerics.
//!
//! Everything in this module is deliberately boring: polynomials with
//! ascending coefficients, SISO rational transfer functions, state-space
//! models, a matrix exponential, impulse responses, and the bilinear
//! (Tustin) map. The analysis modules above build reset-specific theory out
//! of these pieces; this layer knows nothing about resets.
//!
//! Two conventions matter everywhere:
//!
//! - Polynomial coefficients ascend: `[a0, a1, a2]` is `a0 + a1 s + a2 s²`.
//!   Serialized forms (`{"num": [...], "den": [...]}`) use the same order.
//! - Transfer-function evaluation is always on the imaginary axis, at
//!   `s = jω` with `ω ≥ 0` in rad/s.

mod disc;
mod expm;
mod poly;
mod ss;
mod tf;

pub use disc::tustin;
pub use expm::expm;
pub use poly::Polynomial;
pub use ss::{cascade, impulse_response, tf_to_ss, ImpulseResponse, StateSpaceModel, Timing};
pub use tf::{LimitAtZero, RationalTransferFunction, DEGREE_CAP};
