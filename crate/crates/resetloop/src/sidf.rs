//! First-order sinusoidal-input describing functions (SIDF).
//!
//! Driven by a sinusoid, a reset element produces a periodic but
//! non-sinusoidal output. Its first-order describing function `C_r¹(ω)` is
//! the complex gain seen by the fundamental: the base-linear response plus a
//! jump correction `Θ_φ(ω)` that depends on the phase of the trigger shaper
//! `∠C_s(ω)` — shaping the trigger moves the reset instants, which moves the
//! fundamental of the reset action.
//!
//! Everything here assumes the element resets exactly twice per steady-state
//! cycle. That assumption is *not* verified by these functions; the
//! multiple-reset detector decides where it holds, and the simulator
//! arbitrates where it does not.
//!
//! One structural quirk is preserved deliberately: the describing-function
//! open loop `L₁ = C₁ (C_r¹ + C₂) C₃ P` omits the feedback block `C₄`,
//! while the base-linear loop `L_bl` includes it. All bundled presets use
//! `C₄ = 1`, so the asymmetry is inert there, but user topologies with
//! `C₄ ≠ 1` will see it — as specified.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linsys::expm;
use crate::reset_core::{LoopTopology, ResetElement};

/// First-order describing-function responses of a loop at one frequency.
#[derive(Clone, Copy, Debug)]
pub struct SidfPoint {
    /// Angular frequency, rad/s.
    pub frequency: f64,
    /// Reset-element describing function `C_r¹(ω)`.
    pub c_r1: Complex64,
    /// Open loop `L₁(ω) = C₁ (C_r¹ + C₂) C₃ P`.
    pub l1: Complex64,
    /// Closed-loop sensitivity `S(ω) = 1/(1 + L₁(ω))`.
    pub sensitivity: Complex64,
}

/// Gain-crossover report of the describing-function open loop.
#[derive(Clone, Copy, Debug)]
pub struct MarginReport {
    /// Bandwidth: the angular frequency (rad/s) where `|L₁|` crosses unity.
    pub bandwidth: f64,
    /// Phase margin in degrees: `180° + ∠L₁(ω_BW)`.
    pub phase_margin: f64,
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
    let min = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// The jump correction `Θ_φ(ω)` of the first-order describing function, as
/// an `n_c`-vector:
///
/// ```text
/// Θ_φ = −(2jω/π) e^{jθ} Ω(ω) [ω cosθ I − A_R sinθ] (ω²I + A_R²)⁻¹ B_R,
/// Ω   = Δ − Δ Δ_r⁻¹ A_ρ Δ,   Δ = I + e^{(π/ω)A_R},   Δ_r = I + A_ρ e^{(π/ω)A_R},
/// ```
///
/// with `θ = ∠C_s(ω)` the trigger-shaper phase. For identity-jump fixtures
/// (`A_ρ = I`) the correction vanishes identically.
///
/// # Errors
/// [`Error::SingularKernel`] if `Δ_r` or `ω²I + A_R²` has condition number
/// above 1e12; matrix-exponential failures propagate.
pub fn theta_phi(reset: &ResetElement, cs_phase: f64, omega: f64) -> Result<DVector<Complex64>> {
    assert!(omega > 0.0, "theta_phi requires omega > 0");
    let n = reset.order();
    let a_r = reset.a_r();
    let a_rho = reset.a_rho();
    let ident = DMatrix::<f64>::identity(n, n);

    let e_pi = expm(&(a_r * (std::f64::consts::PI / omega)))?;
    let delta = &ident + &e_pi;
    let delta_r = &ident + &a_rho * &e_pi;
    if condition_number(&delta_r) > 1e12 {
        return Err(Error::SingularKernel { omega });
    }
    let sq = omega * omega * &ident + a_r * a_r;
    if condition_number(&sq) > 1e12 {
        return Err(Error::SingularKernel { omega });
    }

    let dr_inv_ad = delta_r
        .clone()
        .lu()
        .solve(&(&a_rho * &delta))
        .ok_or(Error::SingularKernel { omega })?;
    let omega_mat = &delta - &delta * dr_inv_ad;

    let (sin_t, cos_t) = cs_phase.sin_cos();
    let trig = omega * cos_t * &ident - a_r * sin_t;
    let sq_inv_b = sq
        .lu()
        .solve(reset.b_r())
        .ok_or(Error::SingularKernel { omega })?;
    let real_part: DMatrix<f64> = omega_mat * trig * sq_inv_b;

    let scalar = Complex64::new(0.0, -2.0 * omega / std::f64::consts::PI)
        * Complex64::new(0.0, cs_phase).exp();
    Ok(DVector::from_iterator(
        n,
        real_part.iter().map(|&v| scalar * v),
    ))
}

/// The first-order describing function of the reset element,
/// `C_r¹(ω) = C_R (A_R − jωI)⁻¹ Θ_φ(ω) + C_l(ω)`, where `C_l` is the
/// base-linear controller response and `∠C_s(ω)` is taken from the supplied
/// trigger shaper (principal value in `(−π, π]`).
///
/// # Errors
/// Propagates [`theta_phi`] failures and shaper evaluation errors.
pub fn reset_sidf(
    reset: &ResetElement,
    cs: &crate::linsys::RationalTransferFunction,
    omega: f64,
) -> Result<Complex64> {
    let cs_phase = cs.eval(omega)?.arg();
    let th = theta_phi(reset, cs_phase, omega)?;
    let n = reset.order();
    // (A_R − jωI) x = Θ_φ, then C_R x.
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = Complex64::new(reset.a_r()[(i, j)], 0.0);
        }
        m[(i, i)] -= Complex64::new(0.0, omega);
    }
    let x = m
        .lu()
        .solve(&DMatrix::from_fn(n, 1, |i, _| th[i]))
        .ok_or(Error::SingularKernel { omega })?;
    let mut corr = Complex64::new(0.0, 0.0);
    for i in 0..n {
        corr += Complex64::new(reset.c_r()[(0, i)], 0.0) * x[(i, 0)];
    }
    let blc = reset.blc().eval(omega)?;
    Ok(corr + blc)
}

/// Closed-form describing function of a Clegg-type (generalized) integrator
/// with unit base-linear gain:
///
/// ```text
/// C_r¹(ω) = (Θ_CI + 1) / (jω),
/// Θ_CI    = 4j (1−γ) e^{jθ} cosθ / (π (1+γ)),
/// ```
///
/// with `θ` the trigger-shaper phase. Serves as an independent oracle for
/// [`reset_sidf`] on single-state integrating elements.
pub fn ci_sidf_closed_form(gamma: f64, cs_phase: f64, omega: f64) -> Complex64 {
    assert!(omega > 0.0, "describing function requires omega > 0");
    assert!(gamma != -1.0, "gamma = -1 makes the closed form degenerate");
    let theta_ci = Complex64::new(0.0, 4.0 * (1.0 - gamma) / (std::f64::consts::PI * (1.0 + gamma)))
        * Complex64::new(0.0, cs_phase).exp()
        * cs_phase.cos();
    (theta_ci + 1.0) / Complex64::new(0.0, omega)
}

/// The describing-function open loop `L₁(ω) = C₁ (C_r¹ + C₂) C₃ P`.
///
/// `C₄` is intentionally absent here (and present in the base-linear loop);
/// see the module docs.
///
/// # Errors
/// Propagates describing-function and evaluation failures.
pub fn open_loop_sidf(topology: &LoopTopology, omega: f64) -> Result<Complex64> {
    let c_r1 = reset_sidf(&topology.reset, &topology.cs, omega)?;
    Ok(topology.c1.eval(omega)?
        * (c_r1 + topology.c2.eval(omega)?)
        * topology.c3.eval(omega)?
        * topology.plant.eval(omega)?)
}

/// Closed-loop sensitivity `S(ω) = 1/(1 + L₁(ω))` of the
/// describing-function loop.
///
/// # Errors
/// [`Error::DivergentSensitivity`] when `|1 + L₁| < 1e−12`; otherwise as
/// [`open_loop_sidf`].
pub fn closed_sensitivity(topology: &LoopTopology, omega: f64) -> Result<Complex64> {
    let l1 = open_loop_sidf(topology, omega)?;
    let den = l1 + 1.0;
    if den.norm() < 1e-12 {
        return Err(Error::DivergentSensitivity { omega });
    }
    Ok(den.inv())
}

/// Evaluates the full describing-function point (element, open loop,
/// sensitivity) at one frequency.
///
/// # Errors
/// As [`closed_sensitivity`].
pub fn sidf_point(topology: &LoopTopology, omega: f64) -> Result<SidfPoint> {
    let c_r1 = reset_sidf(&topology.reset, &topology.cs, omega)?;
    let l1 = topology.c1.eval(omega)?
        * (c_r1 + topology.c2.eval(omega)?)
        * topology.c3.eval(omega)?
        * topology.plant.eval(omega)?;
    let den = l1 + 1.0;
    if den.norm() < 1e-12 {
        return Err(Error::DivergentSensitivity { omega });
    }
    Ok(SidfPoint {
        frequency: omega,
        c_r1,
        l1,
        sensitivity: den.inv(),
    })
}

/// Finds the gain crossover of `|L₁|` and the phase margin there.
///
/// A 400-point geometric scan over `[ω_lo, ω_hi]` brackets the
/// lowest-frequency downward unity crossing, which geometric bisection then
/// sharpens to well below 0.01% relative. The loop is assumed to cross from
/// above: `|L₁(ω_lo)| > 1 > |L₁(ω_hi)|` for the scan to find anything.
///
/// # Errors
/// [`Error::NoCrossing`] if no sign change of `|L₁| − 1` is bracketed;
/// evaluation failures propagate.
pub fn margins(topology: &LoopTopology, omega_lo: f64, omega_hi: f64) -> Result<MarginReport> {
    assert!(
        omega_lo > 0.0 && omega_hi > omega_lo,
        "margins requires 0 < omega_lo < omega_hi"
    );
    const SCAN: usize = 400;
    let ratio = omega_hi / omega_lo;
    let grid = |k: usize| omega_lo * ratio.powf(k as f64 / (SCAN - 1) as f64);

    let mut prev_w = grid(0);
    let mut prev_mag = open_loop_sidf(topology, prev_w)?.norm();
    let mut bracket = None;
    for k in 1..SCAN {
        let w = grid(k);
        let mag = open_loop_sidf(topology, w)?.norm();
        if prev_mag > 1.0 && mag <= 1.0 {
            bracket = Some((prev_w, w));
            break;
        }
        prev_w = w;
        prev_mag = mag;
    }
    let (mut lo, mut hi) = bracket.ok_or(Error::NoCrossing {
        lo: omega_lo,
        hi: omega_hi,
    })?;

    for _ in 0..80 {
        let mid = (lo * hi).sqrt();
        if open_loop_sidf(topology, mid)?.norm() > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let bandwidth = (lo * hi).sqrt();
    let phase = open_loop_sidf(topology, bandwidth)?.arg();
    Ok(MarginReport {
        bandwidth,
        phase_margin: 180.0 + phase.to_degrees(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::RationalTransferFunction;
    use approx::assert_relative_eq;

    fn ci_topology(gain: f64, gamma: f64) -> LoopTopology {
        LoopTopology {
            c1: RationalTransferFunction::one(),
            c2: RationalTransferFunction::constant(0.0),
            c3: RationalTransferFunction::one(),
            c4: RationalTransferFunction::one(),
            cs: RationalTransferFunction::one(),
            plant: RationalTransferFunction::one(),
            reset: ResetElement::clegg(gain, gamma).unwrap(),
        }
    }

    #[test]
    fn identity_jump_fixture_has_zero_correction() {
        let fixture = ResetElement::linear_integrator_fixture(1.0);
        for &w in &[0.1, 6.28, 628.0] {
            let th = theta_phi(&fixture, 0.3, w).unwrap();
            assert!(th[0].norm() < 1e-300);
            let df = reset_sidf(&fixture, &RationalTransferFunction::one(), w).unwrap();
            let blc = fixture.blc().eval(w).unwrap();
            assert!((df - blc).norm() <= 1e-10 * blc.norm());
        }
    }

    #[test]
    fn clegg_phase_is_constant_at_minus_38_deg() {
        let reset = ResetElement::clegg(1.0, 0.0).unwrap();
        let cs = RationalTransferFunction::one();
        for k in 0..10 {
            let w = 2.0 * std::f64::consts::PI * 10f64.powf(-1.0 + 4.0 * k as f64 / 9.0);
            let df = reset_sidf(&reset, &cs, w).unwrap();
            assert!((df.arg().to_degrees() - (-38.15)).abs() < 0.05);
            // Gain follows |1 + Θ_CI| / ω.
            let want_gain = (Complex64::new(1.0, 4.0 / std::f64::consts::PI)).norm() / w;
            assert_relative_eq!(df.norm(), want_gain, max_relative = 1e-9);
        }
    }

    #[test]
    fn closed_form_matches_matrix_form_for_clegg_family() {
        let cs = RationalTransferFunction::new(&[1.0, 1.0 / 300.0], &[1.0, 1.0 / 3000.0]).unwrap();
        for &gamma in &[-0.5, 0.0, 0.13, 0.3, 0.85] {
            let reset = ResetElement::clegg(1.0, gamma).unwrap();
            for k in 0..100 {
                let w = 2.0 * std::f64::consts::PI * 10f64.powf(-1.0 + 4.0 * k as f64 / 99.0);
                let theta = cs.eval(w).unwrap().arg();
                let want = ci_sidf_closed_form(gamma, theta, w);
                let got = reset_sidf(&reset, &cs, w).unwrap();
                assert!(
                    (want - got).norm() <= 1e-9 * want.norm(),
                    "gamma {gamma}, w {w}"
                );
            }
        }
    }

    #[test]
    fn shaper_phase_of_ninety_degrees_restores_pure_integrator() {
        let df = ci_sidf_closed_form(0.0, std::f64::consts::FRAC_PI_2, 10.0);
        let pure = Complex64::new(0.0, 10.0).inv();
        assert!((df - pure).norm() < 1e-15);
    }

    #[test]
    fn phase_lead_grows_with_shaper_phase_up_to_the_peak() {
        // The lead of a shaped Clegg integrator rises with the shaper phase
        // only up to θ* = atan(2/π) ≈ 32.48° (where dφ_s/dθ = 0) and falls
        // beyond; designs therefore keep ∠C_s below the peak.
        let w = 2.0 * std::f64::consts::PI * 40.0;
        let peak = (2.0 / std::f64::consts::PI).atan();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=8 {
            let theta = peak * k as f64 / 8.0;
            let phase = ci_sidf_closed_form(0.0, theta, w).arg();
            assert!(phase > prev, "phase must increase below the peak");
            prev = phase;
        }
        let past_peak = ci_sidf_closed_form(0.0, 45.0_f64.to_radians(), w).arg();
        assert!(past_peak < prev, "phase lead must decline past the peak");
    }

    #[test]
    fn trivial_loop_is_integrator_plus_one() {
        let mut topo = ci_topology(1.0, 0.0);
        topo.reset = ResetElement::linear_integrator_fixture(1.0);
        topo.c2 = RationalTransferFunction::one();
        let w = 3.7;
        let l1 = open_loop_sidf(&topo, w).unwrap();
        let want = Complex64::new(0.0, w).inv() + 1.0;
        assert!((l1 - want).norm() < 1e-12);
    }

    #[test]
    fn sensitivity_vanishes_where_the_loop_blows_up() {
        let topo = ci_topology(100.0, 0.0);
        let s = closed_sensitivity(&topo, 1e-4).unwrap();
        assert!(s.norm() < 1e-5);
    }

    #[test]
    fn sensitivity_identity_holds_pointwise() {
        let topo = ci_topology(50.0, 0.2);
        for &w in &[0.3, 7.0, 260.0] {
            let p = sidf_point(&topo, w).unwrap();
            let residual = p.sensitivity * (p.l1 + 1.0) - 1.0;
            assert!(residual.norm() < 1e-12);
        }
    }

    #[test]
    fn integrator_fixture_margins_are_textbook() {
        let mut topo = ci_topology(1.0, 0.0);
        topo.reset = ResetElement::linear_integrator_fixture(80.0);
        let report = margins(&topo, 1.0, 1e4).unwrap();
        assert_relative_eq!(report.bandwidth, 80.0, max_relative = 1e-6);
        assert_relative_eq!(report.phase_margin, 90.0, max_relative = 1e-6);
    }

    #[test]
    fn missing_crossover_is_reported() {
        // A static gain below unity never crosses 0 dB.
        let mut topo = ci_topology(1.0, 0.0);
        topo.reset = ResetElement::linear_fixture(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            0.5,
        )
        .unwrap();
        assert!(matches!(
            margins(&topo, 1.0, 100.0),
            Err(Error::NoCrossing { .. })
        ));
    }
}
