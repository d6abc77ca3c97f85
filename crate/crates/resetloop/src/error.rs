//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Result`]. Variants are
//! grouped loosely by the module that raises them; they carry enough context
//! (frequencies, degrees, names of violated constraints) for a caller to
//! report the failure without re-deriving it.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the analysis and simulation routines.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// A transfer function was evaluated on (or numerically too close to)
    /// one of its poles on the imaginary axis.
    #[error("transfer function has a pole at or near jw for w = {omega} rad/s")]
    PoleOnAxis {
        /// Angular frequency of the attempted evaluation, rad/s.
        omega: f64,
    },

    /// A polynomial product would exceed the supported degree cap.
    #[error("operation would produce a polynomial of degree {degree}, above the cap of {cap}")]
    DegreeOverflow {
        /// Degree the result would have had.
        degree: usize,
        /// Maximum supported degree.
        cap: usize,
    },

    /// A state-space realization was requested for a transfer function with
    /// numerator degree exceeding denominator degree.
    #[error("improper transfer function: numerator degree {num} exceeds denominator degree {den}")]
    ImproperTransferFunction {
        /// Numerator degree.
        num: usize,
        /// Denominator degree.
        den: usize,
    },

    /// A matrix computation encountered or produced non-finite entries.
    #[error("non-finite value encountered in {context}")]
    NonFinite {
        /// Short description of the failing computation.
        context: &'static str,
    },

    /// The bilinear (Tustin) map is singular at the requested step, i.e.
    /// `I - A T/2` is not invertible (A has an eigenvalue at `2/T`).
    #[error("Tustin discretization is singular at step {step} s")]
    SingularTustin {
        /// Sample period that produced the singularity, s.
        step: f64,
    },

    /// Matrix dimensions of a state-space model or reset element are
    /// inconsistent.
    #[error("dimension mismatch: {context}")]
    DimensionMismatch {
        /// Short description of the mismatched quantities.
        context: String,
    },

    /// The reset scaling coefficient lies outside the open interval (-1, 1).
    #[error("reset coefficient {gamma} outside the open interval (-1, 1)")]
    InvalidResetCoefficient {
        /// Offending coefficient.
        gamma: f64,
    },

    /// The describing-function kernel matrix is numerically singular at the
    /// requested frequency (condition number above 1e12).
    #[error("describing-function kernel is numerically singular at w = {omega} rad/s")]
    SingularKernel {
        /// Angular frequency of the attempted evaluation, rad/s.
        omega: f64,
    },

    /// No gain crossover was found in the scanned frequency range.
    #[error("no gain crossover of the open loop in [{lo}, {hi}] rad/s")]
    NoCrossing {
        /// Lower end of the scanned range, rad/s.
        lo: f64,
        /// Upper end of the scanned range, rad/s.
        hi: f64,
    },

    /// The sensitivity denominator `1 + L` vanished at the requested
    /// frequency.
    #[error("closed-loop sensitivity diverges at w = {omega} rad/s (|1 + L| < 1e-12)")]
    DivergentSensitivity {
        /// Angular frequency of the attempted evaluation, rad/s.
        omega: f64,
    },

    /// The first-order harmonic underflowed, so higher-order ratios are
    /// undefined.
    #[error("first-order harmonic magnitude underflowed at w = {omega} rad/s")]
    DegenerateFirstHarmonic {
        /// Angular frequency of the attempted evaluation, rad/s.
        omega: f64,
    },

    /// A spectral decomposition was requested on a window that does not
    /// contain an integer number of base periods.
    #[error(
        "measurement window covers {periods} periods of the base frequency; \
         an integer count (within 0.01%) is required"
    )]
    NonIntegerPeriods {
        /// Fractional period count of the offered window.
        periods: f64,
    },

    /// A reset-pattern spectrum was requested with no recorded reset events.
    #[error("no reset events available to build a stair-step spectrum")]
    EmptyResetSet,

    /// The simulated state grew beyond the divergence guard.
    #[error("simulation diverged at t = {time} s (state magnitude exceeded {guard:e})")]
    SimulationDiverged {
        /// Time of the first diverged sample, s.
        time: f64,
        /// Guard threshold that was exceeded.
        guard: f64,
    },

    /// The base-linear closed loop is unstable, so a hybrid simulation on
    /// top of it is meaningless.
    #[error("base-linear closed loop is unstable; refusing to simulate")]
    UnstableBaseLoop,

    /// A design constraint was violated; the message names the inequality.
    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    /// A phase formula was evaluated at an angle where it degenerates
    /// (cosine of the shaper phase too close to zero).
    #[error("shaper phase {theta} rad makes the reset phase formula degenerate")]
    DegenerateAngle {
        /// Offending shaper phase, rad.
        theta: f64,
    },

    /// A preset or topology description could not be parsed.
    #[error("invalid system description: {0}")]
    InvalidDescription(String),
}
