//! Trigger-shaper design and validation.
//!
//! The reset trigger is not the raw loop error but a shaped copy
//! `z_s = C_s z`. The shaper carries no signal power into the loop — it
//! decides only *when* the element resets — so it can attack two side
//! effects of reset action without touching the base-linear design:
//!
//! - **High-order harmonics.** The harmonic ratio β_n grows wherever the
//!   nonlinear kernel `T_β` is large. A magnitude target for `|C_s|`
//!   derived from a chosen ceiling σ_β
//!   ([`crate::harmonics::target_shaper_magnitude`]) is approximated here
//!   by standard rational shapes: the PI form [`pi_shaper`] and the
//!   lead-augmented form [`pid_shaper`].
//! - **Limit cycles.** Under a step, reset events persist only when the
//!   trigger settles to zero. A shaper with a pole at the origin parks the
//!   trigger at a nonzero constant instead, starving the events
//!   ([`eliminates_limit_cycle`]); [`predicts_limit_cycle`] is the full
//!   analytic verdict matching the simulator's behavioral one.
//!
//! The phase the shaper contributes at the design bandwidth converts
//! directly into describing-function phase margin for Clegg-integrator
//! elements; [`ci_phase_margins`] and [`phase_lead`] are the closed forms.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::harmonics::target_shaper_magnitude;
use crate::linsys::{LimitAtZero, RationalTransferFunction};
use crate::reset_core::LoopTopology;
use crate::simulator::{final_value_zs, FinalValue};

// ---------------------------------------------------------------------------
// Shaper constructors.

/// Parameters of the PID-structured trigger shaper
/// `C_s(s) = k_s · (1 + ω_α/s) · (s/ω_β + 1)/(s/ω_η + 1) · 1/(s/ω_ψ + 1)`.
///
/// The PI part supplies the low-frequency gain that suppresses high-order
/// harmonics (and, through its origin pole, eliminates limit cycles); the
/// lead pair `(ω_β, ω_η)` buys back positive phase at the loop bandwidth;
/// the final pole `ω_ψ` rolls the filter off.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PidShaperParams {
    /// Overall gain, nonzero. Pure scaling of the shaper changes neither
    /// β_n nor the reset instants, so the sign and magnitude are free.
    pub k_s: f64,
    /// PI corner, rad/s.
    pub omega_alpha: f64,
    /// Lead zero, rad/s; must be positive.
    pub omega_beta: f64,
    /// Lead pole, rad/s; must lie above the design bandwidth so the lead
    /// is still active there.
    pub omega_eta: f64,
    /// Roll-off pole, rad/s; must lie above the lead pole.
    pub omega_psi: f64,
}

/// A constructed PID shaper together with the phase it delivers at the
/// design bandwidth.
#[derive(Clone, Debug)]
pub struct PidShaper {
    /// The rational filter.
    pub filter: RationalTransferFunction,
    /// `∠C_s(ω_BW)` in degrees; guaranteed positive by construction.
    pub phase_at_bandwidth_deg: f64,
}

/// The PI trigger shaper `C_s(s) = 1 + ω_α/s = (s + ω_α)/s`.
///
/// # Panics
/// Panics unless `ω_α > 0`.
pub fn pi_shaper(omega_alpha: f64) -> RationalTransferFunction {
    assert!(omega_alpha > 0.0, "pi_shaper requires omega_alpha > 0");
    RationalTransferFunction::new(&[omega_alpha, 1.0], &[0.0, 1.0])
        .expect("nonzero denominator")
}

/// Builds the PID-structured shaper from `params`, validating its design
/// inequalities against the supplied bandwidth and the positivity of the
/// phase it delivers there.
///
/// # Panics
/// Panics unless `ω_α > 0` and `ω_BW > 0`.
///
/// # Errors
/// [`Error::ConstraintViolation`] naming the violated inequality:
/// `k_s != 0`, `omega_beta > 0`, `omega_eta > omega_bw`,
/// `omega_psi > omega_eta`, or `angle(C_s(omega_bw)) > 0`.
pub fn pid_shaper(params: &PidShaperParams, omega_bw: f64) -> Result<PidShaper> {
    assert!(params.omega_alpha > 0.0, "pid_shaper requires omega_alpha > 0");
    assert!(omega_bw > 0.0, "pid_shaper requires omega_bw > 0");
    if params.k_s == 0.0 {
        return Err(Error::ConstraintViolation("k_s != 0".into()));
    }
    if params.omega_beta <= 0.0 {
        return Err(Error::ConstraintViolation("omega_beta > 0".into()));
    }
    if params.omega_eta <= omega_bw {
        return Err(Error::ConstraintViolation("omega_eta > omega_bw".into()));
    }
    if params.omega_psi <= params.omega_eta {
        return Err(Error::ConstraintViolation("omega_psi > omega_eta".into()));
    }
    let pi = RationalTransferFunction::new(&[params.omega_alpha, 1.0], &[0.0, 1.0])?;
    let lead = RationalTransferFunction::new(
        &[1.0, 1.0 / params.omega_beta],
        &[1.0, 1.0 / params.omega_eta],
    )?;
    let roll = RationalTransferFunction::new(&[1.0], &[1.0, 1.0 / params.omega_psi])?;
    let filter = RationalTransferFunction::constant(params.k_s)
        .series(&pi)?
        .series(&lead)?
        .series(&roll)?;
    let phase_at_bandwidth_deg = filter.eval(omega_bw)?.arg().to_degrees();
    if phase_at_bandwidth_deg <= 0.0 {
        return Err(Error::ConstraintViolation(format!(
            "angle(C_s(omega_bw)) > 0 (got {phase_at_bandwidth_deg:.3}°)"
        )));
    }
    Ok(PidShaper {
        filter,
        phase_at_bandwidth_deg,
    })
}

// ---------------------------------------------------------------------------
// Closed-form phase margins for Clegg-integrator elements.

/// Phase margins of a Clegg-integrator reset element relative to the loop's
/// −180° line, as a pair `(φ₀, φ_s)` in degrees:
///
/// ```text
/// φ₀        = arctan(−π(1+γ) / (4(1−γ)))
/// φ_s(θ)    = arctan((4(1−γ) sinθ cosθ − π(1+γ)) / (4(1−γ) cos²θ))
/// ```
///
/// where `θ = ∠C_s(ω_BW)` is the trigger-shaper phase at the bandwidth.
/// `φ₀` is the unshaped (`θ = 0`) value; the difference is the phase lead
/// bought by shaping. Both are phases of the element's describing function
/// measured against a pure integrator's −90°.
///
/// # Panics
/// Panics unless `γ ∈ (−1, 1)`.
///
/// # Errors
/// [`Error::DegenerateAngle`] if `|cos θ| < 1e-9` (the formula's
/// denominator vanishes).
pub fn ci_phase_margins(gamma: f64, cs_phase: f64) -> Result<(f64, f64)> {
    assert!(
        gamma > -1.0 && gamma < 1.0,
        "ci_phase_margins requires gamma in (-1, 1)"
    );
    let (sin_t, cos_t) = cs_phase.sin_cos();
    if cos_t.abs() < 1e-9 {
        return Err(Error::DegenerateAngle { theta: cs_phase });
    }
    let pi = std::f64::consts::PI;
    let base = 4.0 * (1.0 - gamma);
    let phi0 = (-pi * (1.0 + gamma) / base).atan().to_degrees();
    let phi_s = ((base * sin_t * cos_t - pi * (1.0 + gamma)) / (base * cos_t * cos_t))
        .atan()
        .to_degrees();
    Ok((phi0, phi_s))
}

/// The phase lead `φ_s(θ) − φ₀` in degrees bought by shaping the trigger
/// of a Clegg-integrator element with a filter of phase `θ` at the
/// bandwidth.
///
/// # Errors
/// As [`ci_phase_margins`].
pub fn phase_lead(gamma: f64, cs_phase: f64) -> Result<f64> {
    let (phi0, phi_s) = ci_phase_margins(gamma, cs_phase)?;
    Ok(phi_s - phi0)
}

// ---------------------------------------------------------------------------
// Limit-cycle predicates.

/// Outcome of the trigger final-value test for a candidate shaper.
#[derive(Clone, Copy, Debug)]
pub struct EliminationReport {
    /// True iff the trigger parks away from zero under a step, starving
    /// reset events.
    pub eliminated: bool,
    /// The steady-state trigger limit that produced the verdict.
    pub trigger_limit: FinalValue,
}

/// Tests whether installing `cs` as the trigger shaper eliminates
/// step-input limit cycles: the shaped trigger's final value under a unit
/// step is computed from the closed-loop rational `C_s C₁ S_bl`, and the
/// cycle is declared eliminated iff that limit is away from zero (a
/// diverging limit also parks the trigger off zero and counts as
/// eliminated). A zero limit means the trigger keeps crossing zero at
/// equilibrium, sustaining reset events.
///
/// # Errors
/// Composition failures ([`Error::DegreeOverflow`],
/// [`Error::InvalidDescription`]) propagate.
pub fn eliminates_limit_cycle(
    cs: &RationalTransferFunction,
    topology: &LoopTopology,
) -> Result<EliminationReport> {
    let mut candidate = topology.clone();
    candidate.cs = cs.clone();
    let trigger_limit = final_value_zs(&candidate)?;
    Ok(EliminationReport {
        eliminated: !matches!(trigger_limit, FinalValue::Zero),
        trigger_limit,
    })
}

/// Analytic limit-cycle verdict for a step input, designed to agree with
/// the simulator's behavioral verdict ([`crate::simulator::step_response`]).
/// A sustained cycle requires all three of:
///
/// 1. the trigger settles to zero (`final_value_zs` is
///    [`FinalValue::Zero`]), so reset events never starve;
/// 2. the reset branch's base-linear path `C₁ C_l S_bl` has a nonzero
///    step limit — the element keeps injecting a DC contribution that each
///    reset destroys and the flow must rebuild, sustaining the oscillation;
/// 3. the reset-free loop `C₁ C₂ C₃ P C₄` has no pole at the origin —
///    otherwise a parallel linear integrator absorbs the DC burden and the
///    equilibrium with the element's state at zero is reachable, so no
///    cycle persists.
///
/// Identity-jump fixtures never cycle: their jumps are no-ops.
///
/// # Errors
/// Composition failures propagate.
pub fn predicts_limit_cycle(topology: &LoopTopology) -> Result<bool> {
    if topology.reset.is_linear_fixture() {
        return Ok(false);
    }
    if !matches!(final_value_zs(topology)?, FinalValue::Zero) {
        return Ok(false);
    }
    let sbl = topology.bls_sensitivity()?;
    let branch = topology.c1.series(&topology.reset.blc())?.series(&sbl)?;
    let branch_dc = match branch.limit_at_zero().value() {
        Some(v) => v,
        None => return Ok(false),
    };
    if branch_dc == 0.0 {
        return Ok(false);
    }
    let reset_free = topology
        .c1
        .series(&topology.c2)?
        .series(&topology.c3)?
        .series(&topology.plant)?
        .series(&topology.c4)?;
    Ok(!matches!(reset_free.limit_at_zero(), LimitAtZero::Infinite))
}

// ---------------------------------------------------------------------------
// Optional least-squares shaper fit.

/// Number of logarithmically spaced fit points.
const FIT_GRID_POINTS: usize = 60;

/// Fits [`PidShaperParams`] to the harmonic-suppression magnitude target of
/// `topology` (σ_β ceiling for the third harmonic) over `[ω_lo, ω_hi]`.
///
/// Convenience only — shapers are normally designed by inspection against
/// the emitted target curve. The objective is least squares of the
/// log-magnitude mismatch on a `FIT_GRID_POINTS`-point log grid, with the
/// design constraints (`ω_η > ω_BW`, `ω_ψ > ω_η`) and the positivity of
/// `∠C_s(ω_BW)` enforced as quadratic penalties; minimized by Nelder–Mead
/// in log-parameter space from a deterministic heuristic start. Note the
/// absolute level of the target (hence the fitted `k_s`) is a free
/// normalization: β_n is invariant under scaling of `C_s`.
///
/// # Panics
/// Panics unless `0 < ω_lo < ω_hi` and `ω_BW > 0`; σ_β is validated by
/// [`target_shaper_magnitude`].
///
/// # Errors
/// Target-curve failures propagate; [`Error::ConstraintViolation`] if the
/// optimum still violates a design inequality.
pub fn fit_pid_shaper(
    topology: &LoopTopology,
    sigma_beta: f64,
    omega_lo: f64,
    omega_hi: f64,
    omega_bw: f64,
) -> Result<PidShaperParams> {
    assert!(
        omega_lo > 0.0 && omega_hi > omega_lo,
        "fit_pid_shaper requires 0 < omega_lo < omega_hi"
    );
    assert!(omega_bw > 0.0, "fit_pid_shaper requires omega_bw > 0");
    let ratio = (omega_hi / omega_lo).powf(1.0 / (FIT_GRID_POINTS - 1) as f64);
    let mut grid = Vec::with_capacity(FIT_GRID_POINTS);
    for k in 0..FIT_GRID_POINTS {
        let w = omega_lo * ratio.powi(k as i32);
        grid.push((w, target_shaper_magnitude(topology, w, sigma_beta, 3)?.ln()));
    }

    // Direct complex evaluation of the shaper shape; avoids rebuilding
    // rationals inside the optimizer loop.
    let shape = |p: &PidShaperParams, w: f64| -> Complex64 {
        let s = Complex64::new(0.0, w);
        Complex64::new(p.k_s, 0.0) * (1.0 + p.omega_alpha / s) * (s / p.omega_beta + 1.0)
            / ((s / p.omega_eta + 1.0) * (s / p.omega_psi + 1.0))
    };
    let from_logs = |x: &[f64]| PidShaperParams {
        k_s: x[0].exp(),
        omega_alpha: x[1].exp(),
        omega_beta: x[2].exp(),
        omega_eta: x[3].exp(),
        omega_psi: x[4].exp(),
    };
    let objective = |x: &[f64]| -> f64 {
        let p = from_logs(x);
        let mut sse = 0.0;
        for &(w, ln_target) in &grid {
            let d = shape(&p, w).norm().ln() - ln_target;
            sse += d * d;
        }
        let mut penalty = 0.0;
        if p.omega_eta <= omega_bw {
            let v = (omega_bw / p.omega_eta).ln() + 0.05;
            penalty += 1e3 * v * v;
        }
        if p.omega_psi <= p.omega_eta {
            let v = (p.omega_eta / p.omega_psi).ln() + 0.05;
            penalty += 1e3 * v * v;
        }
        let phase_deg = shape(&p, omega_bw).arg().to_degrees();
        if phase_deg < 1.0 {
            penalty += 10.0 * (1.0 - phase_deg) * (1.0 - phase_deg);
        }
        sse + penalty
    };

    // Heuristic start: PI corner at the band's upper edge, lead astride the
    // bandwidth, gain matched at the upper edge where the PI contributes √2.
    let target_hi = grid[FIT_GRID_POINTS - 1].1.exp();
    let x0 = [
        (target_hi / std::f64::consts::SQRT_2).ln(),
        omega_hi.ln(),
        (4.0 * omega_hi).ln(),
        (10.0 * omega_bw).ln(),
        (60.0 * omega_bw).ln(),
    ];
    let x = nelder_mead(&objective, &x0, 0.5, 800);
    let fitted = from_logs(&x);
    // The penalty keeps the optimum inside the feasible region; validate
    // via the real constructor so violations surface as named errors.
    pid_shaper(&fitted, omega_bw).map(|_| fitted)
}

/// Minimizes `f` by the Nelder–Mead simplex method from `x0` with initial
/// per-coordinate step `step`, returning the best vertex after `iters`
/// iterations (or once the simplex collapses). Deterministic.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], step: f64, iters: usize) -> Vec<f64> {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    for _ in 0..iters {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let (best, second_worst, worst) = (order[0], order[n - 1], order[n]);
        if (vals[worst] - vals[best]).abs() < 1e-14 * (1.0 + vals[best].abs()) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for &i in order.iter().take(n) {
            for (c, x) in centroid.iter_mut().zip(&pts[i]) {
                *c += x / n as f64;
            }
        }
        let blend = |a: f64, b: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[worst])
                .map(|(c, w)| a * c + b * w)
                .collect()
        };
        let reflected = blend(2.0, -1.0);
        let fr = f(&reflected);
        if fr < vals[best] {
            let expanded = blend(3.0, -2.0);
            let fe = f(&expanded);
            if fe < fr {
                pts[worst] = expanded;
                vals[worst] = fe;
            } else {
                pts[worst] = reflected;
                vals[worst] = fr;
            }
        } else if fr < vals[second_worst] {
            pts[worst] = reflected;
            vals[worst] = fr;
        } else {
            let contracted = blend(0.5, 0.5);
            let fc = f(&contracted);
            if fc < vals[worst] {
                pts[worst] = contracted;
                vals[worst] = fc;
            } else {
                // Shrink toward the best vertex.
                let best_pt = pts[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    for (x, b) in pts[i].iter_mut().zip(&best_pt) {
                        *x = 0.5 * (*x + b);
                    }
                    vals[i] = f(&pts[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if vals[i] < vals[best] {
            best = i;
        }
    }
    pts.swap_remove(best)
}
