//! Multiple-reset detection.
//!
//! The describing-function picture of a reset loop assumes the element
//! resets exactly twice per steady-state cycle — once per zero crossing of a
//! sinusoidal trigger. At low frequencies that assumption collapses: the
//! trigger picks up enough harmonic content to cross zero more than twice
//! per cycle, the element resets in bursts, and first-order predictions go
//! quantitatively wrong. This module decides, per frequency, whether the
//! loop is in the two-reset or the multiple-reset regime, without running a
//! simulation.
//!
//! The test works on one half-cycle of the steady state. Write the shaped
//! trigger after the first reset of a half-cycle as the sum of a base-linear
//! sinusoid and the ringing caused by the reset jump itself:
//!
//! ```text
//! Δ(t_δ) = |S_ls(ω)| · sin(ω t_δ) + h_β(t_δ) · Θ_s(ω),    t_δ ∈ (0, t_m),
//! ```
//!
//! where `S_ls = C_s C₁ S_bl` is the trigger-path sensitivity, `h_β` is the
//! impulse-response kernel of the jump transient through the closed loop,
//! `Θ_s` weights that kernel by the state the jump discarded, and `t_m` is
//! the time remaining until the next base-linear zero crossing. An interior
//! zero of `Δ` is an extra trigger crossing: the loop is a multiple-reset
//! system at that frequency. No zero means the two-reset assumption holds.
//!
//! The boundary frequency reported by [`sweep`] is the highest frequency at
//! which the verdict transitions from multiple to two-reset on an ascending
//! grid — above it, first-order (describing-function) analysis is
//! trustworthy; below it, only the simulator is.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linsys::{
    cascade, expm, impulse_response, tf_to_ss, RationalTransferFunction, StateSpaceModel,
};
use crate::reset_core::{resolvent_expansion, LoopTopology};

/// Default number of interior profile samples used by the verdict
/// operations.
pub const DEFAULT_PROFILE_POINTS: usize = 2000;

/// Relative tolerance under which a profile sample counts as a zero even
/// without a sign change: `|Δ| ≤ ATOL_FRACTION × max|Δ|`.
const ATOL_FRACTION: f64 = 1e-12;

/// Margin for the accelerated sweep evaluator: a coarse stage may declare
/// "no interior zero" only when its smallest |Δ| exceeds this fraction of
/// its largest |Δ|; anything closer refines to the next finer stage, down
/// to the exact full-resolution grid.
const EARLY_EXIT_MARGIN: f64 = 0.02;

// ---------------------------------------------------------------------------
// Composite kernel rationals.

/// The three composite rational kernels of the steady-state reset transient,
/// prior to realization: the state kernel `T_s = S_bl (sI−A_R)⁻¹ (A_ρ−I)`
/// (one rational per matrix entry), the output kernel
/// `T_α = C_σ C_R T_s` with `C_σ = C₃ P C₄ C₁` (row), and the shaped kernel
/// `C_s T_α` (row) whose impulse response is `h_β`.
#[derive(Clone, Debug)]
pub struct KernelRationals {
    /// `n_c × n_c` matrix of rationals: columns weight the discarded state.
    pub t_s: Vec<Vec<RationalTransferFunction>>,
    /// `1 × n_c` row of rationals.
    pub t_alpha: Vec<RationalTransferFunction>,
    /// `1 × n_c` row of rationals: the trigger-path kernel.
    pub cs_t_alpha: Vec<RationalTransferFunction>,
}

/// Forms the composite kernel rationals symbolically: the resolvent
/// `(sI−A_R)⁻¹` is expanded by Leverrier–Faddeev (adjugate over
/// characteristic polynomial, exact for the small `n_c` used here) and
/// multiplied by the scalar rational loop factors.
///
/// # Errors
/// [`Error::DegreeOverflow`] if any composition exceeds the degree cap.
pub fn composite_kernel_tf(topology: &LoopTopology) -> Result<KernelRationals> {
    let reset = &topology.reset;
    let n = reset.order();
    let (adj, den) = resolvent_expansion(reset.a_r());
    let jump_residue = reset.a_rho() - DMatrix::<f64>::identity(n, n);
    let sbl = topology.bls_sensitivity()?;
    let c_sigma = topology
        .c3
        .series(&topology.plant)?
        .series(&topology.c4)?
        .series(&topology.c1)?;

    let mut t_s = vec![vec![RationalTransferFunction::constant(0.0); n]; n];
    let mut t_alpha = Vec::with_capacity(n);
    let mut cs_t_alpha = Vec::with_capacity(n);
    for j in 0..n {
        for i in 0..n {
            // Numerator of [(sI−A_R)⁻¹(A_ρ−I)]_{ij}, ascending powers.
            let mut num = vec![0.0; n.max(1)];
            for (k, m) in adj.iter().enumerate() {
                num[n - 1 - k] = (m * &jump_residue)[(i, j)];
            }
            t_s[i][j] = RationalTransferFunction::new(&num, &den)?.series(&sbl)?;
        }
        let mut alpha_num = vec![0.0; n.max(1)];
        for (k, m) in adj.iter().enumerate() {
            alpha_num[n - 1 - k] = (reset.c_r() * m * &jump_residue)[(0, j)];
        }
        let alpha_core = RationalTransferFunction::new(&alpha_num, &den)?;
        let alpha = alpha_core.series(&c_sigma)?.series(&sbl)?;
        cs_t_alpha.push(alpha.series(&topology.cs)?);
        t_alpha.push(alpha);
    }
    Ok(KernelRationals {
        t_s,
        t_alpha,
        cs_t_alpha,
    })
}

// ---------------------------------------------------------------------------
// Kernel sampling.

/// Time-sampled steady-state kernels over one half-cycle `(0, π/ω]`.
#[derive(Clone, Debug)]
pub struct PiecewiseKernels {
    /// Angular frequency, rad/s.
    pub frequency: f64,
    /// Sample times, uniform over `(0, π/ω]` including the endpoint.
    pub t_grid: Vec<f64>,
    /// State-kernel samples `h_s(t)`, one `n_c × n_c` matrix per time.
    pub h_s: Vec<DMatrix<f64>>,
    /// Output-kernel samples `h_α(t)`, one `n_c`-row per time.
    pub h_alpha: Vec<Vec<f64>>,
    /// Shaped-kernel samples `h_β(t)`, one `n_c`-row per time.
    pub h_beta: Vec<Vec<f64>>,
}

/// Builds per-component state-space realizations of the kernel rationals.
///
/// Each composite is realized as a cascade of its factor blocks rather than
/// as a single companion form of the expanded polynomial product: the
/// expanded coefficients of high-order composites span many decades and
/// poison a monolithic realization, while the factor cascade keeps each
/// block small and well-conditioned. The transfer functions are identical.
struct KernelRealizations {
    /// Cascades whose impulse responses are the columns of `h_s`.
    s_blocks: Vec<Vec<StateSpaceModel>>,
    /// Cascades for the rows of `h_α`.
    alpha_blocks: Vec<StateSpaceModel>,
    /// Cascades for the rows of `h_β` (the Δ-test kernel).
    beta_blocks: Vec<StateSpaceModel>,
}

fn kernel_realizations(topology: &LoopTopology) -> Result<KernelRealizations> {
    let reset = &topology.reset;
    let n = reset.order();
    let (adj, den) = resolvent_expansion(reset.a_r());
    let jump_residue = reset.a_rho() - DMatrix::<f64>::identity(n, n);

    let cs_ss = tf_to_ss(&topology.cs)?;
    let c1_ss = tf_to_ss(&topology.c1)?;
    // The post-element path is realized as one combined block so that an
    // improper compensator with a proper compensator·plant product remains
    // realizable; a genuinely improper product is reported.
    let c3p_ss = tf_to_ss(&topology.c3.series(&topology.plant)?)?;
    let c4_ss = tf_to_ss(&topology.c4)?;
    let blc_c2 = tf_to_ss(&reset.blc().parallel(&topology.c2)?)?;
    let sbl_ss = cascade(&[&c1_ss, &blc_c2, &c3p_ss, &c4_ss])?.unity_sensitivity()?;

    let mut s_blocks = vec![Vec::with_capacity(n); n];
    let mut alpha_blocks = Vec::with_capacity(n);
    let mut beta_blocks = Vec::with_capacity(n);
    for j in 0..n {
        for (i, row) in s_blocks.iter_mut().enumerate() {
            let mut num = vec![0.0; n.max(1)];
            for (k, m) in adj.iter().enumerate() {
                num[n - 1 - k] = (m * &jump_residue)[(i, j)];
            }
            let core = tf_to_ss(&RationalTransferFunction::new(&num, &den)?)?;
            row.push(cascade(&[&sbl_ss, &core])?);
        }
        let mut alpha_num = vec![0.0; n.max(1)];
        for (k, m) in adj.iter().enumerate() {
            alpha_num[n - 1 - k] = (reset.c_r() * m * &jump_residue)[(0, j)];
        }
        let core = tf_to_ss(&RationalTransferFunction::new(&alpha_num, &den)?)?;
        alpha_blocks.push(cascade(&[&c1_ss, &c3p_ss, &c4_ss, &sbl_ss, &core])?);
        beta_blocks.push(cascade(&[
            &cs_ss, &c1_ss, &c3p_ss, &c4_ss, &sbl_ss, &core,
        ])?);
    }
    Ok(KernelRealizations {
        s_blocks,
        alpha_blocks,
        beta_blocks,
    })
}

/// Samples the steady-state kernels on a uniform grid of `points` samples
/// over `(0, π/ω]`.
///
/// # Panics
/// Panics unless `ω > 0` and `points ≥ 1000`.
///
/// # Errors
/// [`Error::ImproperTransferFunction`] if a composite cannot be realized;
/// composition and matrix-exponential failures propagate.
pub fn kernels(topology: &LoopTopology, omega: f64, points: usize) -> Result<PiecewiseKernels> {
    assert!(omega > 0.0, "kernels requires omega > 0");
    assert!(points >= 1000, "kernel grids need at least 1000 points");
    let n = topology.reset.order();
    let half_cycle = std::f64::consts::PI / omega;
    let t_grid: Vec<f64> = (1..=points)
        .map(|j| j as f64 * half_cycle / points as f64)
        .collect();

    let real = kernel_realizations(topology)?;
    let mut h_s = vec![DMatrix::<f64>::zeros(n, n); points];
    for j in 0..n {
        for i in 0..n {
            let resp = impulse_response(&real.s_blocks[i][j], &t_grid)?;
            for (k, s) in resp.samples.iter().enumerate() {
                h_s[k][(i, j)] = s[(0, 0)];
            }
        }
    }
    let sample_row = |blocks: &[StateSpaceModel]| -> Result<Vec<Vec<f64>>> {
        let mut rows = vec![vec![0.0; n]; points];
        for (j, block) in blocks.iter().enumerate() {
            let resp = impulse_response(block, &t_grid)?;
            for (k, s) in resp.samples.iter().enumerate() {
                rows[k][j] = s[(0, 0)];
            }
        }
        Ok(rows)
    };
    let h_alpha = sample_row(&real.alpha_blocks)?;
    let h_beta = sample_row(&real.beta_blocks)?;
    Ok(PiecewiseKernels {
        frequency: omega,
        t_grid,
        h_s,
        h_alpha,
        h_beta,
    })
}

// ---------------------------------------------------------------------------
// Per-frequency scalar prefactors.

/// Scalar geometry of one half-cycle at frequency ω.
#[derive(Clone, Debug)]
struct Prefactors {
    t1: f64,
    t_m: f64,
    s_ls_mag: f64,
    theta_s: Vec<f64>,
}

/// Branch selection for the first reset instant: with `θ = ∠S_ls(ω)`
/// (principal value),
///
/// ```text
/// θ ∈ (0, π]  :  t₁ = (π − θ)/ω,   t_m = θ/ω
/// θ ∈ (−π, 0):  t₁ = −θ/ω,         t_m = (π + θ)/ω
/// ```
///
/// `θ = 0` sits on the branch boundary and is resolved as the first branch
/// (`t₁ = π/ω`, `t_m = 0`: an empty scan window meaning a two-reset
/// verdict). The identity `t₁ + t_m = π/ω` holds on both branches.
fn reset_instants(theta: f64, omega: f64) -> (f64, f64) {
    if theta >= 0.0 {
        ((std::f64::consts::PI - theta) / omega, theta / omega)
    } else {
        (-theta / omega, (std::f64::consts::PI + theta) / omega)
    }
}

fn prefactors(
    topology: &LoopTopology,
    sbl: &RationalTransferFunction,
    omega: f64,
) -> Result<Prefactors> {
    let c1_sbl = topology.c1.eval(omega)? * sbl.eval(omega)?;
    let s_ls = topology.cs.eval(omega)? * c1_sbl;
    let theta = s_ls.arg();
    let (t1, t_m) = reset_instants(theta, omega);

    // Θ_bl = (jωI − A_R)⁻¹ B_R · (C₁ S_bl)(ω), elementwise magnitude/phase.
    let reset = &topology.reset;
    let n = reset.order();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = Complex64::new(-reset.a_r()[(i, j)], 0.0);
        }
        m[(i, i)] += Complex64::new(0.0, omega);
    }
    let b = DMatrix::from_fn(n, 1, |i, _| Complex64::new(reset.b_r()[(i, 0)], 0.0));
    let x = m.lu().solve(&b).ok_or(Error::SingularKernel { omega })?;
    let theta_s = (0..n)
        .map(|i| {
            let theta_bl = x[(i, 0)] * c1_sbl;
            theta_bl.norm() * (theta - theta_bl.arg()).sin()
        })
        .collect();

    Ok(Prefactors {
        t1,
        t_m,
        s_ls_mag: s_ls.norm(),
        theta_s,
    })
}

/// The first reset instant `t₁ ∈ (0, π/ω]` of a steady-state half-cycle,
/// measured from the zero crossing of the reference sinusoid.
///
/// # Errors
/// Propagates evaluation failures of the trigger-path response.
pub fn first_reset_instant(topology: &LoopTopology, omega: f64) -> Result<f64> {
    assert!(omega > 0.0, "first_reset_instant requires omega > 0");
    let sbl = topology.bls_sensitivity()?;
    Ok(prefactors(topology, &sbl, omega)?.t1)
}

/// The jump-weight vector `Θ_s(ω)`: elementwise
/// `|Θ_bl| sin(∠S_ls − ∠Θ_bl)` with `Θ_bl = (jωI−A_R)⁻¹ B_R C₁ S_bl`.
/// It scales the kernel `h_β` inside the Δ-profile; its sign tracks the
/// state the jump discards at the first reset.
///
/// # Errors
/// Propagates evaluation failures.
pub fn theta_s(topology: &LoopTopology, omega: f64) -> Result<Vec<f64>> {
    assert!(omega > 0.0, "theta_s requires omega > 0");
    let sbl = topology.bls_sensitivity()?;
    Ok(prefactors(topology, &sbl, omega)?.theta_s)
}

// ---------------------------------------------------------------------------
// Δ-profile and verdicts.

/// The sampled inter-reset profile `Δ(t_δ)` on the open window `(0, t_m)`.
#[derive(Clone, Debug)]
pub struct DeltaProfile {
    /// Angular frequency, rad/s.
    pub frequency: f64,
    /// First reset instant, s.
    pub t1: f64,
    /// Scan-window length, s (an empty window yields empty samples).
    pub t_m: f64,
    /// Interior sample times, `t_j = j·t_m/(points+1)`.
    pub times: Vec<f64>,
    /// Profile values at those times.
    pub values: Vec<f64>,
}

/// Two-reset/multiple-reset decision at one frequency.
#[derive(Clone, Copy, Debug)]
pub struct MultiResetVerdict {
    /// Angular frequency, rad/s.
    pub frequency: f64,
    /// True iff the profile has an interior zero (multiple-reset regime).
    pub is_multiple: bool,
    /// First reset instant `t₁ ∈ (0, π/ω]`, s.
    pub t1: f64,
    /// Scan-window length `t_m ∈ [0, π/ω]`, s; `t₁ + t_m = π/ω`.
    pub t_m: f64,
    /// Smallest `|Δ|` among evaluated samples (infinite for an empty
    /// window).
    pub delta_min_abs: f64,
    /// First detected zero location, s (linear interpolation between the
    /// bracketing samples), when `is_multiple`.
    pub crossing_time: Option<f64>,
}

/// One reset-state component of the Δ kernel, with the sine prefactor
/// carried separately: Δ(t) = s_ls_mag·sin(ωt) + Σ_i θ_s[i]·(C_i e^{A_i t} B_i).
struct DeltaEvaluator<'a> {
    blocks: &'a [StateSpaceModel],
    pre: Prefactors,
    omega: f64,
}

impl DeltaEvaluator<'_> {
    /// Evaluates Δ on the stride-`s` subset of the fine interior grid
    /// `t_j = j·dt`, `j = stride, 2·stride, …, points`, where
    /// `dt = t_m/(points+1)`. `fine_steps[c]` must hold `e^{A_c dt}`.
    fn stage_values(
        &self,
        fine_steps: &[DMatrix<f64>],
        points: usize,
        stride: usize,
        dt: f64,
    ) -> Vec<f64> {
        let count = points / stride;
        let mut values = vec![0.0; count];
        for (k, v) in values.iter_mut().enumerate() {
            let t = (k + 1) as f64 * stride as f64 * dt;
            *v = self.pre.s_ls_mag * (self.omega * t).sin();
        }
        for (c, block) in self.blocks.iter().enumerate() {
            let weight = self.pre.theta_s[c];
            if weight == 0.0 || block.order() == 0 {
                continue;
            }
            let mut step = fine_steps[c].clone();
            let mut s = stride;
            while s > 1 {
                step = &step * &step;
                s /= 2;
            }
            // Propagate x ← e^{A·stride·dt} x in place; the per-sample work
            // is one gemv and one dot product, allocation-free.
            let mut x = (&step * block.b()).column(0).into_owned();
            let mut next = DVector::zeros(x.nrows());
            for v in values.iter_mut() {
                let cx: f64 = block.c().row(0).iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                *v += weight * cx;
                step.mul_to(&x, &mut next);
                std::mem::swap(&mut x, &mut next);
            }
        }
        values
    }
}

/// Outcome of scanning one stage of profile values.
enum ScanOutcome {
    /// Sign change or near-zero sample: index of the left bracket (or the
    /// near-zero sample itself, with `exact = true`).
    Zero { left: usize, exact: bool },
    /// No zero found; carries min|Δ| and max|Δ| of the stage.
    Clear { min_abs: f64, max_abs: f64 },
}

fn scan(values: &[f64]) -> ScanOutcome {
    let mut max_abs = 0.0_f64;
    let mut min_abs = f64::INFINITY;
    for &v in values {
        max_abs = max_abs.max(v.abs());
        min_abs = min_abs.min(v.abs());
    }
    let atol = ATOL_FRACTION * max_abs;
    for (j, &v) in values.iter().enumerate() {
        if v.abs() <= atol {
            return ScanOutcome::Zero {
                left: j,
                exact: true,
            };
        }
        if j + 1 < values.len() && v * values[j + 1] < 0.0 {
            return ScanOutcome::Zero {
                left: j,
                exact: false,
            };
        }
    }
    ScanOutcome::Clear { min_abs, max_abs }
}

fn min_abs_of(values: &[f64]) -> f64 {
    values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

fn verdict_from_stage(
    values: &[f64],
    outcome: &ScanOutcome,
    stride: usize,
    dt: f64,
    pre: &Prefactors,
    omega: f64,
) -> MultiResetVerdict {
    match *outcome {
        ScanOutcome::Zero { left, exact } => {
            let t_left = (left + 1) as f64 * stride as f64 * dt;
            let crossing = if exact {
                t_left
            } else {
                let t_right = t_left + stride as f64 * dt;
                let (a, b) = (values[left], values[left + 1]);
                t_left + (t_right - t_left) * a / (a - b)
            };
            MultiResetVerdict {
                frequency: omega,
                is_multiple: true,
                t1: pre.t1,
                t_m: pre.t_m,
                delta_min_abs: min_abs_of(values),
                crossing_time: Some(crossing),
            }
        }
        ScanOutcome::Clear { min_abs, .. } => MultiResetVerdict {
            frequency: omega,
            is_multiple: false,
            t1: pre.t1,
            t_m: pre.t_m,
            delta_min_abs: min_abs,
            crossing_time: None,
        },
    }
}

fn empty_window_verdict(pre: &Prefactors, omega: f64) -> MultiResetVerdict {
    MultiResetVerdict {
        frequency: omega,
        is_multiple: false,
        t1: pre.t1,
        t_m: pre.t_m,
        delta_min_abs: f64::INFINITY,
        crossing_time: None,
    }
}

/// Shared context for evaluating verdicts at many frequencies of one
/// topology: the kernel realizations and the base-linear sensitivity are
/// frequency-independent and built once.
struct Detector {
    beta_blocks: Vec<StateSpaceModel>,
    sbl: RationalTransferFunction,
}

impl Detector {
    fn new(topology: &LoopTopology) -> Result<Self> {
        Ok(Detector {
            beta_blocks: kernel_realizations(topology)?.beta_blocks,
            sbl: topology.bls_sensitivity()?,
        })
    }

    fn evaluator(
        &self,
        topology: &LoopTopology,
        omega: f64,
    ) -> Result<Option<DeltaEvaluator<'_>>> {
        let pre = prefactors(topology, &self.sbl, omega)?;
        if pre.t_m <= 0.0 {
            return Ok(None);
        }
        Ok(Some(DeltaEvaluator {
            blocks: &self.beta_blocks,
            pre,
            omega,
        }))
    }

    fn fine_steps(&self, dt: f64) -> Result<Vec<DMatrix<f64>>> {
        self.beta_blocks
            .iter()
            .map(|b| expm(&(b.a() * dt)))
            .collect()
    }

    /// Full-resolution verdict: every interior sample evaluated.
    fn verdict_full(
        &self,
        topology: &LoopTopology,
        omega: f64,
        points: usize,
    ) -> Result<MultiResetVerdict> {
        match self.evaluator(topology, omega)? {
            None => {
                let pre = prefactors(topology, &self.sbl, omega)?;
                Ok(empty_window_verdict(&pre, omega))
            }
            Some(ev) => {
                let dt = ev.pre.t_m / (points + 1) as f64;
                let steps = self.fine_steps(dt)?;
                let values = ev.stage_values(&steps, points, 1, dt);
                let outcome = scan(&values);
                Ok(verdict_from_stage(&values, &outcome, 1, dt, &ev.pre, omega))
            }
        }
    }

    /// Accelerated verdict used by sweeps: evaluates Δ first on the
    /// stride-16 subset of the full interior grid, then (only if needed) on
    /// the full grid. A zero found at either stage is a genuine interior
    /// zero — the samples are exact values of Δ, so a sign change proves a
    /// crossing by the intermediate-value theorem. A "no zero" exit is
    /// taken at the coarse stage only when its |Δ| stays above
    /// [`EARLY_EXIT_MARGIN`] of its peak; anything tighter falls through to
    /// the same full grid the plain verdict uses, so decisions match
    /// [`Detector::verdict_full`] wherever they differ in cost.
    fn verdict_adaptive(
        &self,
        topology: &LoopTopology,
        omega: f64,
        points: usize,
    ) -> Result<MultiResetVerdict> {
        if points % 16 != 0 {
            return self.verdict_full(topology, omega, points);
        }
        match self.evaluator(topology, omega)? {
            None => {
                let pre = prefactors(topology, &self.sbl, omega)?;
                Ok(empty_window_verdict(&pre, omega))
            }
            Some(ev) => {
                let dt = ev.pre.t_m / (points + 1) as f64;
                let steps = self.fine_steps(dt)?;
                for stride in [16usize, 1] {
                    let values = ev.stage_values(&steps, points, stride, dt);
                    let outcome = scan(&values);
                    let decisive = match &outcome {
                        ScanOutcome::Zero { .. } => true,
                        ScanOutcome::Clear { min_abs, max_abs } => {
                            stride == 1 || *min_abs > EARLY_EXIT_MARGIN * *max_abs
                        }
                    };
                    if decisive {
                        return Ok(verdict_from_stage(
                            &values, &outcome, stride, dt, &ev.pre, omega,
                        ));
                    }
                }
                unreachable!("stride-1 stage is always decisive");
            }
        }
    }
}

/// Samples the profile `Δ(t_δ)` on `points` uniformly spaced interior
/// samples of `(0, t_m)` (spacing `t_m/(points+1)`). An empty window
/// (`t_m = 0`) yields empty sample vectors.
///
/// # Errors
/// Realization, composition, and evaluation failures propagate.
pub fn delta_profile(topology: &LoopTopology, omega: f64, points: usize) -> Result<DeltaProfile> {
    assert!(omega > 0.0, "delta_profile requires omega > 0");
    assert!(points >= 1, "delta_profile needs at least one point");
    let det = Detector::new(topology)?;
    match det.evaluator(topology, omega)? {
        None => {
            let pre = prefactors(topology, &det.sbl, omega)?;
            Ok(DeltaProfile {
                frequency: omega,
                t1: pre.t1,
                t_m: pre.t_m,
                times: Vec::new(),
                values: Vec::new(),
            })
        }
        Some(ev) => {
            let dt = ev.pre.t_m / (points + 1) as f64;
            let steps = det.fine_steps(dt)?;
            let values = ev.stage_values(&steps, points, 1, dt);
            let times = (1..=points).map(|j| j as f64 * dt).collect();
            Ok(DeltaProfile {
                frequency: omega,
                t1: ev.pre.t1,
                t_m: ev.pre.t_m,
                times,
                values,
            })
        }
    }
}

/// Decides the reset regime at one frequency from the full-resolution
/// profile: multiple-reset iff the interior samples change sign or fall
/// within `1e−12·max|Δ|` of zero.
///
/// # Errors
/// As [`delta_profile`].
pub fn is_multiple_reset(topology: &LoopTopology, omega: f64) -> Result<MultiResetVerdict> {
    assert!(omega > 0.0, "is_multiple_reset requires omega > 0");
    Detector::new(topology)?.verdict_full(topology, omega, DEFAULT_PROFILE_POINTS)
}

/// Frequency sweep of the multiple-reset test.
#[derive(Clone, Debug)]
pub struct SweepReport {
    /// Requested grid, Hz.
    pub grid_hz: Vec<f64>,
    /// Verdicts for the grid points that evaluated successfully.
    pub verdicts: Vec<MultiResetVerdict>,
    /// Frequencies (Hz) whose evaluation failed, with the failure text;
    /// failures are per-point and never abort the sweep.
    pub failures: Vec<(f64, String)>,
    /// The boundary frequency: the highest grid frequency whose verdict is
    /// multiple-reset while the next grid point is two-reset. Absent if no
    /// such transition exists.
    pub boundary_hz: Option<f64>,
}

/// Sweeps the detector over `[f_lo, f_hi]` Hz in steps of `step` Hz
/// (frequencies evaluated in parallel) and locates the regime boundary.
///
/// Each grid point uses the accelerated nested-grid evaluator (see
/// [`Detector::verdict_adaptive`]); verdicts are identical to the
/// full-resolution test, only cheaper away from the boundary.
///
/// # Panics
/// Panics unless `0 < f_lo < f_hi` and `step > 0`.
///
/// # Errors
/// Only construction of the frequency-independent kernels can fail the
/// whole sweep; per-frequency failures are recorded in the report.
pub fn sweep(topology: &LoopTopology, f_lo_hz: f64, f_hi_hz: f64, step_hz: f64) -> Result<SweepReport> {
    assert!(
        f_lo_hz > 0.0 && f_hi_hz > f_lo_hz && step_hz > 0.0,
        "sweep requires 0 < f_lo < f_hi and step > 0"
    );
    let mut grid_hz = Vec::new();
    let mut f = f_lo_hz;
    while f <= f_hi_hz * (1.0 + 1e-12) {
        grid_hz.push(f);
        f = f_lo_hz + step_hz * grid_hz.len() as f64;
    }
    let det = Detector::new(topology)?;
    // Serial on purpose: one adaptive verdict runs in tens of microseconds,
    // so fork-join scheduling costs more than it buys (the simulation sweep,
    // whose per-frequency runs are milliseconds, is the parallel one).
    let results: Vec<Result<MultiResetVerdict>> = grid_hz
        .iter()
        .map(|&hz| {
            det.verdict_adaptive(
                topology,
                2.0 * std::f64::consts::PI * hz,
                DEFAULT_PROFILE_POINTS,
            )
        })
        .collect();

    let mut verdicts = Vec::with_capacity(grid_hz.len());
    let mut failures = Vec::new();
    let mut per_point: Vec<Option<bool>> = Vec::with_capacity(grid_hz.len());
    for (hz, res) in grid_hz.iter().zip(results) {
        match res {
            Ok(v) => {
                per_point.push(Some(v.is_multiple));
                verdicts.push(v);
            }
            Err(e) => {
                per_point.push(None);
                failures.push((*hz, e.to_string()));
            }
        }
    }
    let mut boundary_hz = None;
    for k in 0..grid_hz.len().saturating_sub(1) {
        if let (Some(true), Some(false)) = (per_point[k], per_point[k + 1]) {
            boundary_hz = Some(grid_hz[k]);
        }
    }
    Ok(SweepReport {
        grid_hz,
        verdicts,
        failures,
        boundary_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reset_core::ResetElement;
    use approx::assert_relative_eq;

    fn plant() -> RationalTransferFunction {
        RationalTransferFunction::new(&[6.615e5], &[5.837e5, 279.4, 83.57]).unwrap()
    }

    /// A benchmark loop: Clegg element with a parallel through-path,
    /// lead-lag compensation, lightly damped plant.
    fn sample_topology(gamma: f64) -> LoopTopology {
        let lead = RationalTransferFunction::new(&[1.0, 1.0 / 711.1], &[1.0, 1.0 / 8800.0])
            .unwrap();
        let lpf = RationalTransferFunction::new(&[1.0], &[1.0, 1.0 / 25000.0]).unwrap();
        let c3 = RationalTransferFunction::constant(40.0)
            .series(&lead)
            .unwrap()
            .series(&lpf)
            .unwrap();
        LoopTopology {
            c1: RationalTransferFunction::one(),
            c2: RationalTransferFunction::one(),
            c3,
            c4: RationalTransferFunction::one(),
            cs: RationalTransferFunction::one(),
            plant: plant(),
            reset: ResetElement::clegg(125.7, gamma).unwrap(),
        }
    }

    fn fixture_topology() -> LoopTopology {
        let mut t = sample_topology(0.0);
        t.reset = ResetElement::linear_integrator_fixture(125.7);
        t
    }

    #[test]
    fn unit_blocks_state_kernel_is_negative_sensitivity_integral() {
        // CI with γ = 0 and every block unity: T_s = −S_bl/s.
        let topo = LoopTopology {
            c1: RationalTransferFunction::one(),
            c2: RationalTransferFunction::constant(0.0),
            c3: RationalTransferFunction::one(),
            c4: RationalTransferFunction::one(),
            cs: RationalTransferFunction::one(),
            plant: RationalTransferFunction::one(),
            reset: ResetElement::clegg(1.0, 0.0).unwrap(),
        };
        let k = composite_kernel_tf(&topo).unwrap();
        let sbl = topo.bls_sensitivity().unwrap();
        for &w in &[0.5, 3.0, 20.0] {
            let want = -sbl.eval(w).unwrap() / num_complex::Complex64::new(0.0, w);
            let got = k.t_s[0][0].eval(w).unwrap();
            assert!((want - got).norm() <= 1e-12 * want.norm());
        }
        // Degree check: S_bl's origin zero cancels the integrator pole
        // exactly, so no removable origin pair survives the composition.
        assert_eq!(k.t_s[0][0].den().degree(), sbl.den().degree());
        assert_ne!(k.t_s[0][0].den().coeffs()[0], 0.0);
    }

    #[test]
    fn fixture_kernels_vanish_identically() {
        let topo = fixture_topology();
        let k = composite_kernel_tf(&topo).unwrap();
        assert!(k.t_s[0][0].num().is_zero());
        assert!(k.t_alpha[0].num().is_zero());
        assert!(k.cs_t_alpha[0].num().is_zero());
        let pk = kernels(&topo, 2.0 * std::f64::consts::PI * 15.0, 1000).unwrap();
        assert!(pk.h_beta.iter().all(|r| r[0] == 0.0));
        assert!(pk.h_s.iter().all(|m| m[(0, 0)] == 0.0));
    }

    #[test]
    fn output_kernel_matches_factor_product() {
        let topo = sample_topology(0.0);
        let w = 2.0 * std::f64::consts::PI * 10.0;
        let k = composite_kernel_tf(&topo).unwrap();
        let sbl = topo.bls_sensitivity().unwrap();
        // T_α = C_σ · C_R (jωI−A_R)⁻¹(A_ρ−I) · S_bl; for the Clegg element
        // the middle factor is gain·(γ−1)/(jω).
        let gain = topo.reset.c_r()[(0, 0)];
        let middle = gain * (topo.reset.gamma() - 1.0) / num_complex::Complex64::new(0.0, w);
        let c_sigma = topo.c3.eval(w).unwrap()
            * topo.plant.eval(w).unwrap()
            * topo.c4.eval(w).unwrap()
            * topo.c1.eval(w).unwrap();
        let want = c_sigma * middle * sbl.eval(w).unwrap();
        let got = k.t_alpha[0].eval(w).unwrap();
        assert!((want - got).norm() <= 1e-9 * want.norm());
    }

    #[test]
    fn kernel_cascades_realize_the_composite_rationals() {
        // The factor-cascade realization must have exactly the transfer
        // function of the symbolically composed rational. (Comparing
        // frequency responses avoids realizing the expanded composite —
        // a monolithic companion form of a tenth-order product is exactly
        // the ill-conditioning the cascade exists to avoid.)
        let topo = sample_topology(0.2);
        let real = kernel_realizations(&topo).unwrap();
        let k = composite_kernel_tf(&topo).unwrap();
        for &hz in &[0.3, 4.0, 25.0, 180.0] {
            let w = 2.0 * std::f64::consts::PI * hz;
            let want = k.cs_t_alpha[0].eval(w).unwrap();
            let got = real.beta_blocks[0].freq_response(w).unwrap()[(0, 0)];
            assert!(
                (want - got).norm() <= 1e-9 * want.norm(),
                "beta kernel mismatch at {hz} Hz: {want} vs {got}"
            );
            let want_a = k.t_alpha[0].eval(w).unwrap();
            let got_a = real.alpha_blocks[0].freq_response(w).unwrap()[(0, 0)];
            assert!((want_a - got_a).norm() <= 1e-9 * want_a.norm());
            let want_s = k.t_s[0][0].eval(w).unwrap();
            let got_s = real.s_blocks[0][0].freq_response(w).unwrap()[(0, 0)];
            assert!((want_s - got_s).norm() <= 1e-9 * want_s.norm());
        }
    }

    #[test]
    fn unit_topology_kernel_matches_its_closed_form() {
        // Everything unity around a Clegg element: the shaped kernel is
        // k(γ−1)/(s+k), whose impulse response is k(γ−1)e^{−kt}.
        let (k, gamma) = (1.7, 0.35);
        let topo = LoopTopology {
            c1: RationalTransferFunction::one(),
            c2: RationalTransferFunction::constant(0.0),
            c3: RationalTransferFunction::one(),
            c4: RationalTransferFunction::one(),
            cs: RationalTransferFunction::one(),
            plant: RationalTransferFunction::one(),
            reset: ResetElement::clegg(k, gamma).unwrap(),
        };
        let w = 2.0 * std::f64::consts::PI * 2.0;
        let pk = kernels(&topo, w, 1000).unwrap();
        for (t, row) in pk.t_grid.iter().zip(pk.h_beta.iter()) {
            let want = k * (gamma - 1.0) * (-k * t).exp();
            assert!(
                (row[0] - want).abs() <= 1e-11 * want.abs(),
                "at t={t}: {} vs {want}",
                row[0]
            );
        }
    }

    #[test]
    fn beta_kernel_has_no_impulsive_part() {
        let topo = sample_topology(0.0);
        let real = kernel_realizations(&topo).unwrap();
        for block in &real.beta_blocks {
            assert!(block.d().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn branch_formulas_cover_the_circle() {
        let w = 10.0;
        let pi = std::f64::consts::PI;
        // 90°: first branch.
        let (t1, tm) = reset_instants(pi / 2.0, w);
        assert_relative_eq!(t1, (pi / 2.0) / w);
        assert_relative_eq!(tm, (pi / 2.0) / w);
        // 0: branch boundary resolved as the first branch.
        let (t1, tm) = reset_instants(0.0, w);
        assert_relative_eq!(t1, pi / w);
        assert_eq!(tm, 0.0);
        let (t1n, tmn) = reset_instants(-0.0, w);
        assert_relative_eq!(t1n, pi / w);
        assert_eq!(tmn, 0.0);
        // −90°: second branch.
        let (t1, tm) = reset_instants(-pi / 2.0, w);
        assert_relative_eq!(t1, (pi / 2.0) / w);
        assert_relative_eq!(tm, (pi / 2.0) / w);
        // Identity everywhere.
        for &th in &[-3.1, -1.0, -1e-9, 1e-9, 0.7, 3.14] {
            let (t1, tm) = reset_instants(th, w);
            assert!((t1 + tm - pi / w).abs() < 1e-15);
            assert!(t1 > 0.0 && t1 <= pi / w);
        }
    }

    #[test]
    fn instants_identity_holds_on_a_real_loop() {
        let topo = sample_topology(0.0);
        for &hz in &[5.0, 17.0, 30.0, 44.0] {
            let w = 2.0 * std::f64::consts::PI * hz;
            let v = is_multiple_reset(&topo, w).unwrap();
            assert!(
                (v.t1 + v.t_m - std::f64::consts::PI / w).abs() < 1e-9,
                "identity broken at {hz} Hz"
            );
            assert!(v.t1 > 0.0 && v.t1 <= std::f64::consts::PI / w);
        }
    }

    #[test]
    fn integrating_shaper_aligns_the_jump_weight_to_zero() {
        // With C_s = 1/s both S_ls and Θ_bl pick up the same −90°, so the
        // phase difference in Θ_s vanishes.
        let mut topo = sample_topology(0.0);
        topo.cs = RationalTransferFunction::integrator(1.0);
        let w = 2.0 * std::f64::consts::PI * 12.0;
        let th = theta_s(&topo, w).unwrap();
        assert!(th[0].abs() < 1e-12 * 1.0_f64.max(th[0].abs()));
    }

    #[test]
    fn fixture_profile_is_a_clean_sine_and_never_multiple() {
        let topo = fixture_topology();
        for &hz in &[2.0, 10.0, 25.0, 45.0] {
            let w = 2.0 * std::f64::consts::PI * hz;
            let p = delta_profile(&topo, w, 500).unwrap();
            // Δ reduces to |S_ls| sin(ωt): strictly positive inside (0, t_m)
            // because t_m < π/ω.
            assert!(p.values.iter().all(|&v| v > 0.0));
            let v = is_multiple_reset(&topo, w).unwrap();
            assert!(!v.is_multiple, "fixture flagged multiple at {hz} Hz");
        }
    }

    #[test]
    fn sample_loop_has_low_frequency_multiple_reset_band() {
        let topo = sample_topology(0.0);
        let low = is_multiple_reset(&topo, 2.0 * std::f64::consts::PI * 10.0).unwrap();
        assert!(low.is_multiple);
        assert!(low.crossing_time.is_some());
        let ct = low.crossing_time.unwrap();
        assert!(ct > 0.0 && ct < low.t_m);
        let high = is_multiple_reset(&topo, 2.0 * std::f64::consts::PI * 45.0).unwrap();
        assert!(!high.is_multiple);
        assert!(high.crossing_time.is_none());
    }

    #[test]
    fn grid_refinement_does_not_flip_clear_verdicts() {
        let topo = sample_topology(0.0);
        let det = Detector::new(&topo).unwrap();
        for &hz in &[8.0, 20.0, 33.0, 40.0, 48.0] {
            let w = 2.0 * std::f64::consts::PI * hz;
            let coarse = det.verdict_full(&topo, w, 2000).unwrap();
            let fine = det.verdict_full(&topo, w, 4000).unwrap();
            assert_eq!(
                coarse.is_multiple, fine.is_multiple,
                "refinement flipped verdict at {hz} Hz"
            );
        }
    }

    #[test]
    fn adaptive_verdicts_match_full_resolution() {
        let topo = sample_topology(0.0);
        let det = Detector::new(&topo).unwrap();
        for hz in 1..=50 {
            let w = 2.0 * std::f64::consts::PI * hz as f64;
            let full = det.verdict_full(&topo, w, 2000).unwrap();
            let fast = det.verdict_adaptive(&topo, w, 2000).unwrap();
            assert_eq!(
                full.is_multiple, fast.is_multiple,
                "adaptive disagreed at {hz} Hz"
            );
        }
    }

    #[test]
    fn sweep_finds_the_known_boundary_of_the_sample_loop() {
        let topo = sample_topology(0.0);
        let report = sweep(&topo, 1.0, 50.0, 1.0).unwrap();
        assert_eq!(report.grid_hz.len(), 50);
        assert!(report.failures.is_empty());
        // Independently frozen value for this loop.
        let b = report.boundary_hz.expect("sample loop must transition");
        assert_relative_eq!(b, 36.0);
        // The boundary is the last multiple→two-reset transition: everything
        // above it is two-reset.
        for v in &report.verdicts {
            let hz = v.frequency / (2.0 * std::f64::consts::PI);
            if hz > b {
                assert!(!v.is_multiple, "expected two-reset at {hz} Hz");
            }
        }
        let at = report
            .verdicts
            .iter()
            .find(|v| (v.frequency / (2.0 * std::f64::consts::PI) - b).abs() < 1e-9)
            .unwrap();
        assert!(at.is_multiple);
    }

    #[test]
    fn amplitude_never_enters_the_verdict() {
        // The profile is homogeneous in the drive amplitude by construction;
        // this guards against an amplitude sneaking into the prefactors.
        let topo = sample_topology(0.13);
        let w = 2.0 * std::f64::consts::PI * 22.0;
        let v = is_multiple_reset(&topo, w).unwrap();
        // Scaling C₄ would change the loop; scaling the reference does not
        // appear anywhere in the API. Assert the verdict is reproducible.
        let v2 = is_multiple_reset(&topo, w).unwrap();
        assert_eq!(v.is_multiple, v2.is_multiple);
        assert_eq!(v.delta_min_abs, v2.delta_min_abs);
    }
}
