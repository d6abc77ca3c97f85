//! Ready-made benchmark loops.
//!
//! All presets close the same lightly damped second-order [`plant`] and
//! share one design point: a describing-function gain crossover at
//! 2π·100 rad/s with a 50° phase margin. The catalog has two families:
//!
//! - **PID family** — a proportional-integral-derivative baseline
//!   ([`pid_baseline`]) and reset variants that replace part or all of its
//!   integrator with a Clegg element: [`pcid`] (plain and
//!   trigger-shaped), [`pci_pid`] (reset integrator in series with a
//!   linear one), and [`pi_ci_d`] (reset and linear integrators in
//!   parallel). These differ in how much DC authority the reset element
//!   holds, which is exactly what decides their limit-cycle behavior.
//! - **Benchmark cases** — six published controller variants
//!   ([`case`]) spanning plain Clegg loops, loops with linear integrators
//!   in the compensator, a nonzero retention coefficient, and a dynamic
//!   trigger shaper; used to validate the multiple-reset boundary
//!   predictions against simulation.
//!
//! Every gain/corner pair printed below that is not a published value is
//! calibrated: the proportional gain and the lead ratio are solved
//! numerically (two-dimensional Newton on the unit-gain and phase-margin
//! conditions at 2π·100 rad/s) and frozen to ten significant digits, so
//! the whole family shares the design point exactly. The tests pin both
//! the calibration and the published blocks.

use std::f64::consts::PI;

use crate::linsys::RationalTransferFunction;
use crate::reset_core::{LoopTopology, ResetElement};
use crate::shaping::{pid_shaper, PidShaperParams};

/// Nominal crossover carried by the PID-family designs, rad/s (= 300π).
/// The describing-function bandwidth lands at 2π·100 = 200π rad/s; the
/// larger ω_c is the corner-placement scale inherited from the design
/// recipe, not the achieved crossover.
pub const OMEGA_C: f64 = 300.0 * PI;

// ---------------------------------------------------------------------------
// Block helpers.

/// First-order lead `(s/ω_z + 1)/(s/ω_p + 1)`.
fn lead(omega_z: f64, omega_p: f64) -> RationalTransferFunction {
    RationalTransferFunction::new(&[1.0, 1.0 / omega_z], &[1.0, 1.0 / omega_p])
        .expect("nonzero denominator")
}

/// First-order low-pass `1/(s/ω_p + 1)`.
fn low_pass(omega_p: f64) -> RationalTransferFunction {
    RationalTransferFunction::new(&[1.0], &[1.0, 1.0 / omega_p]).expect("nonzero denominator")
}

/// PI block `(s + ω_i)/s = 1 + ω_i/s`.
fn pi_block(omega_i: f64) -> RationalTransferFunction {
    RationalTransferFunction::new(&[omega_i, 1.0], &[0.0, 1.0]).expect("nonzero denominator")
}

/// `k_p · (s/ω_d + 1)/(s/ω_t + 1) · 1/(s/ω_f + 1)` with the corners placed
/// symmetrically about ω_c: `ω_d = ω_c/a`, `ω_t = a·ω_c`, `ω_f = 10·ω_c`.
fn pd_filter(k_p: f64, a: f64) -> RationalTransferFunction {
    RationalTransferFunction::constant(k_p)
        .series(&lead(OMEGA_C / a, a * OMEGA_C))
        .expect("within degree cap")
        .series(&low_pass(10.0 * OMEGA_C))
        .expect("within degree cap")
}

/// Unity-block topology: only `C₃`, the trigger shaper, and the reset
/// element vary across most presets.
fn unity_loop(
    c3: RationalTransferFunction,
    cs: RationalTransferFunction,
    reset: ResetElement,
) -> LoopTopology {
    LoopTopology {
        c1: RationalTransferFunction::one(),
        c2: RationalTransferFunction::one(),
        c3,
        c4: RationalTransferFunction::one(),
        cs,
        plant: plant(),
        reset,
    }
}

// ---------------------------------------------------------------------------
// The shared plant.

/// The benchmark plant `6.615×10⁵ / (83.57 s² + 279.4 s + 5.837×10⁵)`: a
/// lightly damped second-order stage with DC gain ≈ 1.133 and a resonance
/// near 13.3 Hz.
pub fn plant() -> RationalTransferFunction {
    RationalTransferFunction::new(&[6.615e5], &[5.837e5, 279.4, 83.57])
        .expect("nonzero denominator")
}

// ---------------------------------------------------------------------------
// PID family.

/// The linear PID baseline: `C₃ = k_p·(1 + ω_i/s)·lead·low-pass` realized
/// with the integrator in the (never-resetting) element slot so the
/// topology matches the reset variants block-for-block. `ω_i = 0.084·ω_c`.
pub fn pid_baseline() -> LoopTopology {
    unity_loop(
        pd_filter(16.949_054_826_8, 4.102_370_475_6),
        RationalTransferFunction::one(),
        ResetElement::linear_integrator_fixture(0.084 * OMEGA_C),
    )
}

/// The Clegg-integrator PID variant: the baseline's integrator is replaced
/// by a reset integrator with base-linear response `0.085·ω_c/s` and full
/// reset (`γ = 0`), in parallel with the unity through-path.
///
/// `shaped = true` installs the dynamic trigger shaper (PI + lead + roll
/// off, gain 213) and retunes the element to `C_l = 1.02·141.4/s`,
/// `γ = 0.13`, spending the shaper's phase lead to restore the original
/// margins while keeping the harmonic ratio β₃ below 0.6 across the
/// multiple-reset band.
pub fn pcid(shaped: bool) -> LoopTopology {
    if shaped {
        let shaper = pid_shaper(
            &PidShaperParams {
                k_s: 213.0,
                omega_alpha: 60.0 * PI,
                omega_beta: 659.7,
                omega_eta: 7.5e3,
                omega_psi: 4.7e4,
            },
            200.0 * PI,
        )
        .expect("shaped preset parameters satisfy the design constraints");
        unity_loop(
            pd_filter(14.118_640_050_9, 4.121_069_597_6),
            shaper.filter,
            ResetElement::clegg(1.02 * 141.4, 0.13).expect("valid retention"),
        )
    } else {
        unity_loop(
            pd_filter(15.052_457_967_8, 3.969_213_376_4),
            RationalTransferFunction::one(),
            ResetElement::clegg(0.085 * OMEGA_C, 0.0).expect("valid retention"),
        )
    }
}

/// Reset and linear integrators in series: the compensator keeps the PID's
/// own PI block (`ω_i = 0.084·ω_c`) while the element slot still holds the
/// Clegg integrator. The linear integrator absorbs the DC burden under a
/// step, so this variant does not limit-cycle.
pub fn pci_pid() -> LoopTopology {
    let c3 = pd_filter(11.475_540_616_8, 5.280_152_558_8)
        .series(&pi_block(0.084 * OMEGA_C))
        .expect("within degree cap");
    unity_loop(
        c3,
        RationalTransferFunction::one(),
        ResetElement::clegg(0.085 * OMEGA_C, 0.0).expect("valid retention"),
    )
}

/// Reset and linear integrators in parallel: the through-path `C₂` becomes
/// `1 + ω_i'/s` and the element's base-linear gain drops to match
/// (`ω_i' = k_r·ω_r = 0.0425·ω_c`, an even split of the baseline's
/// integral action). As with [`pci_pid`], the linear path's pole at the
/// origin prevents limit cycles.
pub fn pi_ci_d() -> LoopTopology {
    let mut topology = unity_loop(
        pd_filter(15.927_264_980_5, 4.035_521_551_8),
        RationalTransferFunction::one(),
        ResetElement::clegg(0.0425 * OMEGA_C, 0.0).expect("valid retention"),
    );
    topology.c2 = pi_block(0.0425 * OMEGA_C);
    topology
}

// ---------------------------------------------------------------------------
// Benchmark cases.

/// The six published benchmark loops. Case 1 is [`pcid`]`(false)`; cases
/// 2–5 vary the compensator and element, and case 6 adds an error-side
/// low-pass and a dynamic trigger shaper.
///
/// # Panics
/// Panics unless `k ∈ 1..=6`.
pub fn case(k: usize) -> LoopTopology {
    match k {
        1 => pcid(false),
        2 => unity_loop(
            RationalTransferFunction::constant(40.0)
                .series(&lead(711.1, 8.8e3))
                .expect("within degree cap")
                .series(&low_pass(2.5e4))
                .expect("within degree cap"),
            RationalTransferFunction::one(),
            ResetElement::clegg(125.7, 0.0).expect("valid retention"),
        ),
        3 => unity_loop(
            RationalTransferFunction::constant(25.0)
                .series(&lead(327.7, 4.8e3))
                .expect("within degree cap")
                .series(&low_pass(1.3e4))
                .expect("within degree cap"),
            RationalTransferFunction::one(),
            ResetElement::clegg(125.7, 0.0).expect("valid retention"),
        ),
        4 => unity_loop(
            RationalTransferFunction::constant(24.0)
                .series(&lead(216.6, 4.1e3))
                .expect("within degree cap")
                .series(&pi_block(94.2))
                .expect("within degree cap")
                .series(&low_pass(9.4e3))
                .expect("within degree cap"),
            RationalTransferFunction::one(),
            ResetElement::clegg(47.1, 0.0).expect("valid retention"),
        ),
        5 => unity_loop(
            RationalTransferFunction::constant(20.5)
                .series(&lead(196.1, 4.5e3))
                .expect("within degree cap")
                .series(&pi_block(94.2))
                .expect("within degree cap")
                .series(&low_pass(9.4e3))
                .expect("within degree cap"),
            RationalTransferFunction::one(),
            ResetElement::clegg(94.2, 0.3).expect("valid retention"),
        ),
        6 => {
            let mut topology = unity_loop(
                RationalTransferFunction::constant(20.5)
                    .series(&lead(150.0 * PI, 3000.0 * PI))
                    .expect("within degree cap")
                    .series(&lead(62.5 * PI, 1440.0 * PI))
                    .expect("within degree cap")
                    .series(&pi_block(15.0 * PI))
                    .expect("within degree cap")
                    .series(&low_pass(3000.0 * PI))
                    .expect("within degree cap"),
                RationalTransferFunction::new(&[1.0, 1.0], &[2.0, 1.0])
                    .expect("nonzero denominator"),
                ResetElement::clegg(30.0 * PI, 0.0).expect("valid retention"),
            );
            topology.c1 = low_pass(150.0 * PI);
            topology
        }
        _ => panic!("case index must lie in 1..=6, got {k}"),
    }
}

// ---------------------------------------------------------------------------
// Catalog.

/// Names accepted by [`by_name`], in catalog order.
pub fn names() -> &'static [&'static str] {
    &[
        "pid",
        "pcid",
        "pcid-shaped",
        "pci-pid",
        "pi-ci-d",
        "case1",
        "case2",
        "case3",
        "case4",
        "case5",
        "case6",
    ]
}

/// Looks a preset up by its catalog name; `None` for unknown names.
pub fn by_name(name: &str) -> Option<LoopTopology> {
    match name {
        "pid" => Some(pid_baseline()),
        "pcid" => Some(pcid(false)),
        "pcid-shaped" => Some(pcid(true)),
        "pci-pid" => Some(pci_pid()),
        "pi-ci-d" => Some(pi_ci_d()),
        "case1" => Some(case(1)),
        "case2" => Some(case(2)),
        "case3" => Some(case(3)),
        "case4" => Some(case(4)),
        "case5" => Some(case(5)),
        "case6" => Some(case(6)),
        _ => None,
    }
}
