//! Hybrid time-domain simulation of the reset loop.
//!
//! This is the ground-truth oracle the frequency-domain predictions are
//! judged against. Every LTI block of the loop is discretized by the
//! bilinear (Tustin) map at a fixed sample rate; the reset element flows
//! under the same rule between events and jumps `x → A_ρ x` whenever the
//! trigger signal `z_s` changes sign between consecutive samples. This
//! mirrors a digital controller implementation: sample-and-hold semantics,
//! no sub-sample event localization (recorded instants are refined by
//! interpolation for reporting only).
//!
//! The block diagram being stepped:
//!
//! ```text
//! r ──►(+)── e ──[C₁]── z ──┬─[reset]── m ──(+)── v ──[C₃·P]── y ──┐
//!       −│                  ├─[C₂]───── a ──(+)                    │
//!        │                  └─[C_s]── z_s (trigger only)           │
//!        └──────────────────────────[C₄]◄──────────────────────────┘
//! ```
//!
//! `C₃` and the plant are discretized as one combined block, so the plant
//! input `u` is reconstructed by a separate discrete observer of `C₃` when
//! `C₃` is proper on its own (otherwise the `u` channel is reported as NaN).
//!
//! At each step the seven loop signals `[e, z, z_s, m, a, v, y]` satisfy a
//! linear system in the current states and reference; it is solved once
//! symbolically at build time. If the feedthrough cycle makes that system
//! singular (a true algebraic loop), a one-sample delay is inserted in the
//! feedback path and the trace says so.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linsys::{tf_to_ss, tustin, LimitAtZero, StateSpaceModel};
use crate::reset_core::LoopTopology;

/// Any sampled state beyond this magnitude aborts the run as divergent.
const DIVERGENCE_GUARD: f64 = 1e12;

/// Reset-per-cycle threshold separating the two-reset regime (exactly 2)
/// from the multiple-reset regime in the presence of count jitter.
const TWO_RESET_DEBOUNCE: f64 = 2.5;

/// Standard deviation of the step-response dither, relative to the step
/// amplitude. A deterministic step can park the loop exactly on an
/// equilibrium that any physical measurement noise would kick off; the
/// dither models that floor so marginal limit cycles are excited
/// reproducibly (the generator is seeded, so runs are deterministic).
const DITHER_RELATIVE_SIGMA: f64 = 1e-6;

/// Seed for the dither stream.
const DITHER_SEED: u64 = 0x7269_6e67_646f_776e;

// ---------------------------------------------------------------------------
// Configuration.

/// One sinusoidal component of a composite reference.
#[derive(Clone, Copy, Debug)]
pub struct SineComponent {
    /// Peak amplitude.
    pub amplitude: f64,
    /// Frequency, Hz.
    pub frequency_hz: f64,
}

/// Reference-input description.
#[derive(Clone, Debug)]
pub enum InputSignal {
    /// `amplitude · sin(2π f t)`.
    Sine {
        /// Peak amplitude.
        amplitude: f64,
        /// Frequency, Hz.
        frequency_hz: f64,
    },
    /// Constant reference from `t = 0`.
    Step {
        /// Step height.
        amplitude: f64,
        /// Simulated horizon, s.
        duration_s: f64,
    },
    /// Sum of sinusoids.
    Composite {
        /// The summed components.
        components: Vec<SineComponent>,
        /// Simulated horizon, s.
        duration_s: f64,
    },
    /// Externally supplied reference samples at the configured rate.
    Samples(Vec<f64>),
}

/// Band-limited white measurement noise added to the reference.
#[derive(Clone, Copy, Debug)]
pub struct NoiseSpec {
    /// Noise power; the per-sample variance is `power × sample_rate`
    /// (band-limited white noise convention).
    pub power: f64,
    /// Seed for the deterministic generator.
    pub seed: u64,
}

/// Simulation setup.
#[derive(Clone, Debug)]
pub struct SimulationConfig {
    /// Fixed sample rate, Hz.
    pub sample_rate_hz: f64,
    /// Settling prefix discarded before measurements, in input cycles
    /// (sine inputs only).
    pub transient_cycles: usize,
    /// Measurement window length, in input cycles (sine inputs only).
    pub measure_cycles: usize,
    /// Consecutive trigger sign changes within this many samples collapse
    /// into one reset event.
    pub debounce_samples: usize,
    /// Reference input.
    pub input: InputSignal,
    /// Optional additive reference noise.
    pub noise: Option<NoiseSpec>,
}

impl SimulationConfig {
    /// Sine configuration with the conventional defaults: 10 kHz sampling,
    /// 30 transient + 10 measured cycles.
    pub fn sine(amplitude: f64, frequency_hz: f64) -> Self {
        SimulationConfig {
            sample_rate_hz: 1.0e4,
            transient_cycles: 30,
            measure_cycles: 10,
            debounce_samples: 3,
            input: InputSignal::Sine {
                amplitude,
                frequency_hz,
            },
            noise: None,
        }
    }

    /// Step configuration at the default rate.
    pub fn step(amplitude: f64, duration_s: f64) -> Self {
        SimulationConfig {
            sample_rate_hz: 1.0e4,
            transient_cycles: 30,
            measure_cycles: 10,
            debounce_samples: 3,
            input: InputSignal::Step {
                amplitude,
                duration_s,
            },
            noise: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Trace and metrics types.

/// Full record of one simulation run.
#[derive(Clone, Debug)]
pub struct SimulationTrace {
    /// Sample rate, Hz.
    pub sample_rate_hz: f64,
    /// Sample times, s.
    pub t: Vec<f64>,
    /// Reference.
    pub r: Vec<f64>,
    /// Tracking error `e = r − C₄ y`.
    pub e: Vec<f64>,
    /// Shaped error `z = C₁ e`.
    pub z: Vec<f64>,
    /// Reset trigger `z_s = C_s z`.
    pub z_s: Vec<f64>,
    /// Reset-element output.
    pub m: Vec<f64>,
    /// Parallel through-path output `a = C₂ z`.
    pub a: Vec<f64>,
    /// Summed controller signal `v = m + a`.
    pub v: Vec<f64>,
    /// Plant input `u = C₃ v` (NaN when `C₃` alone is improper).
    pub u: Vec<f64>,
    /// Plant/loop output.
    pub y: Vec<f64>,
    /// Reset instants, s, refined by linear interpolation of the trigger.
    pub reset_instants: Vec<f64>,
    /// Sample index at which each reset was applied.
    pub reset_sample_indices: Vec<usize>,
    /// Pre-jump reset-element state at each event.
    pub reset_states: Vec<(f64, DVector<f64>)>,
    /// First sample index of the steady-state measurement window.
    pub measure_start: usize,
    /// True when a genuine algebraic loop forced a one-sample delay in the
    /// feedback path.
    pub algebraic_loop_delayed: bool,
}

/// Names the recorded channels of a [`SimulationTrace`] for generic access.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceChannel {
    /// Reference `r`.
    Reference,
    /// Tracking error `e`.
    TrackingError,
    /// Shaped error `z`.
    ShapedError,
    /// Reset trigger `z_s`.
    Trigger,
    /// Reset-element output `m`.
    ResetBranch,
    /// Parallel through-path output `a`.
    ParallelBranch,
    /// Summed controller signal `v`.
    ControllerSum,
    /// Plant input `u`.
    PlantInput,
    /// Plant/loop output `y`.
    PlantOutput,
}

impl SimulationTrace {
    /// Borrows one recorded channel by name.
    pub fn channel(&self, which: TraceChannel) -> &[f64] {
        match which {
            TraceChannel::Reference => &self.r,
            TraceChannel::TrackingError => &self.e,
            TraceChannel::ShapedError => &self.z,
            TraceChannel::Trigger => &self.z_s,
            TraceChannel::ResetBranch => &self.m,
            TraceChannel::ParallelBranch => &self.a,
            TraceChannel::ControllerSum => &self.v,
            TraceChannel::PlantInput => &self.u,
            TraceChannel::PlantOutput => &self.y,
        }
    }
}

/// Steady-state measurements over the trace's measure window.
#[derive(Clone, Copy, Debug)]
pub struct SteadyStateMetrics {
    /// Peak absolute error over the window.
    pub einf: f64,
    /// `max|e| / max|r|` over the window; absent when the reference is
    /// identically zero there.
    pub einf_over_rinf: Option<f64>,
    /// Reset events in the window divided by the number of measured cycles
    /// (for non-sine inputs: the raw event count in the window).
    pub resets_per_cycle: f64,
    /// Limit-cycle verdict (meaningful for step inputs; see
    /// [`detect_limit_cycle`]).
    pub limit_cycle: bool,
    /// Half the peak-to-peak excursion of `e` over the window.
    pub oscillation_amplitude: f64,
}

/// Limit-cycle examination of a step-response trace.
#[derive(Clone, Copy, Debug)]
pub struct LimitCycleVerdict {
    /// True iff persistent, regularly spaced reset events with visible
    /// error oscillation survive in the trailing window.
    pub limit_cycle: bool,
    /// Reset events in the trailing quarter of the trace.
    pub late_resets: usize,
    /// Best (minimum) coefficient of variation of late inter-reset spacings
    /// over gap-group sizes 1..=4 (absent with fewer than three late
    /// events); small values mean a periodic event pattern.
    pub spacing_cv: Option<f64>,
    /// Peak-to-peak error in the trailing window over the step amplitude.
    pub p2p_over_amplitude: f64,
}

/// Outcome of a reset-counting frequency sweep.
#[derive(Clone, Debug)]
pub struct SimBoundaryReport {
    /// Swept grid, Hz.
    pub grid_hz: Vec<f64>,
    /// Measured resets per steady-state cycle at each successful grid point.
    pub resets_per_cycle: Vec<(f64, f64)>,
    /// Every frequency whose count is above the two-reset threshold while
    /// the next grid point is at or below it.
    pub transitions: Vec<f64>,
    /// The boundary: highest transition frequency.
    pub boundary_hz: Option<f64>,
    /// Frequencies whose runs failed (e.g. divergence), with the reason.
    pub failures: Vec<(f64, String)>,
}

/// Steady-state limit of the trigger signal for a unit step, from the
/// final-value theorem applied to `C_s C₁ S_bl`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FinalValue {
    /// Nonzero finite limit: the trigger parks away from zero and reset
    /// events starve.
    Finite(f64),
    /// The trigger settles to zero (the limit-cycle-prone case when the
    /// reset element retains authority).
    Zero,
    /// The composed rational diverges as `s → 0`.
    Divergent,
}

// ---------------------------------------------------------------------------
// Discretized loop.

/// Index layout of the per-step signal vector.
const SIG_E: usize = 0;
const SIG_Z: usize = 1;
const SIG_ZS: usize = 2;
const SIG_M: usize = 3;
const SIG_A: usize = 4;
const SIG_V: usize = 5;
const SIG_Y: usize = 6;
const NSIG: usize = 7;

/// The loop with every block discretized, signal solve precomputed.
struct DiscreteLoop {
    /// Combined state count.
    nx: usize,
    /// Signals = `sx · x + sr · r` (solved form; empty when delayed).
    sx: DMatrix<f64>,
    sr: DVector<f64>,
    /// State update `x⁺ = m · x + n · r` (solved form).
    m: DMatrix<f64>,
    n: DVector<f64>,
    /// Block-diagonal flow and input stacking for the delayed fallback.
    ablk: DMatrix<f64>,
    bstack: DMatrix<f64>,
    /// Per-block output rows/feedthroughs for the delayed fallback, in
    /// block order (c1, cs, cr, c2, c3p, c4).
    c_rows: [DVector<f64>; 6],
    d_vals: [f64; 6],
    offsets: [(usize, usize); 6],
    /// Reset-element state slice and jump map.
    reset_span: (usize, usize),
    a_rho: DMatrix<f64>,
    /// Discrete observer reconstructing `u` from `v` (None: C₃ improper).
    u_observer: Option<StateSpaceModel>,
    /// True when the signal system was singular and the feedback path runs
    /// one sample late.
    delayed: bool,
}

impl DiscreteLoop {
    fn build(topology: &LoopTopology, sample_rate_hz: f64) -> Result<Self> {
        let reset = &topology.reset;
        let c1 = tustin(&tf_to_ss(&topology.c1)?, sample_rate_hz)?;
        let cs = tustin(&tf_to_ss(&topology.cs)?, sample_rate_hz)?;
        let cr = tustin(
            &StateSpaceModel::new(
                reset.a_r().clone(),
                reset.b_r().clone(),
                reset.c_r().clone(),
                DMatrix::from_element(1, 1, reset.d_r()),
                crate::linsys::Timing::Continuous,
            )?,
            sample_rate_hz,
        )?;
        let c2 = tustin(&tf_to_ss(&topology.c2)?, sample_rate_hz)?;
        let c3p = tustin(
            &tf_to_ss(&topology.c3.series(&topology.plant)?)?,
            sample_rate_hz,
        )?;
        let c4 = tustin(&tf_to_ss(&topology.c4)?, sample_rate_hz)?;
        let blocks = [&c1, &cs, &cr, &c2, &c3p, &c4];

        let mut offsets = [(0usize, 0usize); 6];
        let mut at = 0;
        for (k, b) in blocks.iter().enumerate() {
            offsets[k] = (at, at + b.order());
            at += b.order();
        }
        let nx = at;
        let reset_span = offsets[2];

        // Signal balance: asig · sig = mx · x + mr · r.
        let mut asig = DMatrix::<f64>::identity(NSIG, NSIG);
        let mut mx = DMatrix::<f64>::zeros(NSIG, nx);
        let mut mr = DVector::<f64>::zeros(NSIG);
        let mut c_rows: [DVector<f64>; 6] = std::array::from_fn(|_| DVector::zeros(0));
        let mut d_vals = [0.0_f64; 6];
        for (k, b) in blocks.iter().enumerate() {
            c_rows[k] = DVector::from_fn(b.order(), |i, _| b.c()[(0, i)]);
            d_vals[k] = b.d()[(0, 0)];
        }
        let put = |mx: &mut DMatrix<f64>, row: usize, k: usize, sign: f64| {
            let (lo, hi) = offsets[k];
            for (i, col) in (lo..hi).enumerate() {
                mx[(row, col)] = sign * c_rows[k][i];
            }
        };
        // e + D₄ y = r − C₄ x₄
        asig[(SIG_E, SIG_Y)] = d_vals[5];
        put(&mut mx, SIG_E, 5, -1.0);
        mr[SIG_E] = 1.0;
        // z − D₁ e = C₁ x₁
        asig[(SIG_Z, SIG_E)] = -d_vals[0];
        put(&mut mx, SIG_Z, 0, 1.0);
        // z_s − D_s z = C_s x_s
        asig[(SIG_ZS, SIG_Z)] = -d_vals[1];
        put(&mut mx, SIG_ZS, 1, 1.0);
        // m − D_r z = C_r x_r
        asig[(SIG_M, SIG_Z)] = -d_vals[2];
        put(&mut mx, SIG_M, 2, 1.0);
        // a − D₂ z = C₂ x₂
        asig[(SIG_A, SIG_Z)] = -d_vals[3];
        put(&mut mx, SIG_A, 3, 1.0);
        // v = m + a
        asig[(SIG_V, SIG_M)] = -1.0;
        asig[(SIG_V, SIG_A)] = -1.0;
        // y − D₃ v = C₃ x₃
        asig[(SIG_Y, SIG_V)] = -d_vals[4];
        put(&mut mx, SIG_Y, 4, 1.0);

        let mut ablk = DMatrix::<f64>::zeros(nx, nx);
        let mut bstack = DMatrix::<f64>::zeros(nx, NSIG);
        let inputs = [SIG_E, SIG_Z, SIG_Z, SIG_Z, SIG_V, SIG_Y];
        for (k, b) in blocks.iter().enumerate() {
            let (lo, hi) = offsets[k];
            ablk.view_mut((lo, lo), (hi - lo, hi - lo)).copy_from(b.a());
            for (i, row) in (lo..hi).enumerate() {
                bstack[(row, inputs[k])] = b.b()[(i, 0)];
            }
        }

        let delayed = asig.determinant().abs() < 1e-9;
        let (sx, sr, m, n) = if delayed {
            (
                DMatrix::zeros(0, 0),
                DVector::zeros(0),
                DMatrix::zeros(0, 0),
                DVector::zeros(0),
            )
        } else {
            let lu = asig.clone().lu();
            let sx = lu.solve(&mx).ok_or(Error::NonFinite {
                context: "loop signal solve",
            })?;
            let sr = lu.solve(&mr).ok_or(Error::NonFinite {
                context: "loop signal solve",
            })?;
            let m = &ablk + &bstack * &sx;
            let n = &bstack * &sr;
            (sx, sr, m, n)
        };

        let u_observer = if topology.c3.is_proper() {
            Some(tustin(&tf_to_ss(&topology.c3)?, sample_rate_hz)?)
        } else {
            None
        };

        Ok(DiscreteLoop {
            nx,
            sx,
            sr,
            m,
            n,
            ablk,
            bstack,
            c_rows,
            d_vals,
            offsets,
            reset_span,
            a_rho: reset.a_rho(),
            u_observer,
            delayed,
        })
    }

    /// Solves the signal vector in the delayed mode: back-substitution in
    /// loop order, with the feedback tap `y` taken from the previous step.
    fn signals_delayed(&self, x: &DVector<f64>, r: f64, y_prev: f64) -> [f64; NSIG] {
        let block_out = |k: usize, input: f64| -> f64 {
            let (lo, hi) = self.offsets[k];
            let mut acc = self.d_vals[k] * input;
            for (i, row) in (lo..hi).enumerate() {
                acc += self.c_rows[k][i] * x[row];
            }
            acc
        };
        let e = r - block_out(5, y_prev);
        let z = block_out(0, e);
        let zs = block_out(1, z);
        let m = block_out(2, z);
        let a = block_out(3, z);
        let v = m + a;
        let y = block_out(4, v);
        [e, z, zs, m, a, v, y]
    }
}

// ---------------------------------------------------------------------------
// Reference construction.

fn build_reference(config: &SimulationConfig) -> Result<(Vec<f64>, usize)> {
    let fs = config.sample_rate_hz;
    assert!(fs > 0.0, "sample rate must be positive");
    let (mut r, measure_start) = match &config.input {
        InputSignal::Sine {
            amplitude,
            frequency_hz,
        } => {
            assert!(*frequency_hz > 0.0, "sine frequency must be positive");
            assert!(
                fs >= 20.0 * frequency_hz,
                "sample rate must be at least 20x the input frequency"
            );
            assert!(config.measure_cycles >= 2, "need at least 2 measured cycles");
            let spp = fs / frequency_hz;
            let total =
                (spp * (config.transient_cycles + config.measure_cycles) as f64).round() as usize;
            let w = 2.0 * std::f64::consts::PI * frequency_hz;
            let r = (0..total)
                .map(|k| amplitude * (w * k as f64 / fs).sin())
                .collect();
            let k0 = (spp * config.transient_cycles as f64).round() as usize;
            (r, k0)
        }
        InputSignal::Step {
            amplitude,
            duration_s,
        } => {
            assert!(*duration_s > 0.0, "step duration must be positive");
            let total = (duration_s * fs).round() as usize;
            (vec![*amplitude; total], total * 3 / 4)
        }
        InputSignal::Composite {
            components,
            duration_s,
        } => {
            assert!(*duration_s > 0.0, "composite duration must be positive");
            for c in components {
                assert!(
                    fs >= 20.0 * c.frequency_hz,
                    "sample rate must be at least 20x every component frequency"
                );
            }
            let total = (duration_s * fs).round() as usize;
            let r = (0..total)
                .map(|k| {
                    let t = k as f64 / fs;
                    components
                        .iter()
                        .map(|c| c.amplitude * (2.0 * std::f64::consts::PI * c.frequency_hz * t).sin())
                        .sum()
                })
                .collect();
            (r, total * 3 / 4)
        }
        InputSignal::Samples(samples) => {
            let total = samples.len();
            (samples.clone(), total * 3 / 4)
        }
    };
    if let Some(noise) = &config.noise {
        let sigma = (noise.power * fs).sqrt();
        if sigma > 0.0 {
            let gauss = Normal::new(0.0, sigma).map_err(|_| Error::NonFinite {
                context: "noise standard deviation",
            })?;
            let mut rng = ChaCha12Rng::seed_from_u64(noise.seed);
            for v in r.iter_mut() {
                *v += gauss.sample(&mut rng);
            }
        }
    }
    Ok((r, measure_start))
}

// ---------------------------------------------------------------------------
// Simulation.

/// Runs the hybrid discrete loop and records the full trace.
///
/// # Errors
/// [`Error::UnstableBaseLoop`] when the base-linear closed loop has a pole
/// in the right half-plane; [`Error::SimulationDiverged`] if any state
/// exceeds the divergence guard; realization and discretization failures
/// propagate.
pub fn simulate(topology: &LoopTopology, config: &SimulationConfig) -> Result<SimulationTrace> {
    if !topology.bls_sensitivity()?.is_hurwitz() {
        return Err(Error::UnstableBaseLoop);
    }
    let loop_d = DiscreteLoop::build(topology, config.sample_rate_hz)?;
    let (r, measure_start) = build_reference(config)?;
    let total = r.len();
    let fs = config.sample_rate_hz;
    let dt = 1.0 / fs;

    let mut trace = SimulationTrace {
        sample_rate_hz: fs,
        t: (0..total).map(|k| k as f64 * dt).collect(),
        r: r.clone(),
        e: vec![0.0; total],
        z: vec![0.0; total],
        z_s: vec![0.0; total],
        m: vec![0.0; total],
        a: vec![0.0; total],
        v: vec![0.0; total],
        u: vec![f64::NAN; total],
        y: vec![0.0; total],
        reset_instants: Vec::new(),
        reset_sample_indices: Vec::new(),
        reset_states: Vec::new(),
        measure_start,
        algebraic_loop_delayed: loop_d.delayed,
    };

    let mut x = DVector::<f64>::zeros(loop_d.nx);
    let mut x_next = DVector::<f64>::zeros(loop_d.nx);
    let mut u_state = loop_d
        .u_observer
        .as_ref()
        .map(|obs| DVector::<f64>::zeros(obs.order()));
    let (rs_lo, rs_hi) = loop_d.reset_span;
    let n_c = rs_hi - rs_lo;
    let mut zs_prev = 0.0_f64;
    let mut last_event: isize = isize::MIN / 2;

    for k in 0..total {
        let sig: [f64; NSIG] = if loop_d.delayed {
            let y_prev = if k == 0 { 0.0 } else { trace.y[k - 1] };
            loop_d.signals_delayed(&x, r[k], y_prev)
        } else {
            let mut s = [0.0; NSIG];
            for (row, slot) in s.iter_mut().enumerate() {
                let mut acc = loop_d.sr[row] * r[k];
                for col in 0..loop_d.nx {
                    acc += loop_d.sx[(row, col)] * x[col];
                }
                *slot = acc;
            }
            s
        };
        trace.e[k] = sig[SIG_E];
        trace.z[k] = sig[SIG_Z];
        trace.z_s[k] = sig[SIG_ZS];
        trace.m[k] = sig[SIG_M];
        trace.a[k] = sig[SIG_A];
        trace.v[k] = sig[SIG_V];
        trace.y[k] = sig[SIG_Y];
        if let (Some(obs), Some(xs)) = (&loop_d.u_observer, u_state.as_mut()) {
            let mut u = obs.d()[(0, 0)] * sig[SIG_V];
            for i in 0..obs.order() {
                u += obs.c()[(0, i)] * xs[i];
            }
            trace.u[k] = u;
            let mut next = DVector::<f64>::zeros(obs.order());
            for i in 0..obs.order() {
                let mut acc = obs.b()[(i, 0)] * sig[SIG_V];
                for j in 0..obs.order() {
                    acc += obs.a()[(i, j)] * xs[j];
                }
                next[i] = acc;
            }
            *xs = next;
        }

        // Flow update, then jump if the trigger crossed zero.
        if loop_d.delayed {
            let svec = DVector::from_row_slice(&sig);
            loop_d.ablk.mul_to(&x, &mut x_next);
            x_next.gemv(1.0, &loop_d.bstack, &svec, 1.0);
        } else {
            loop_d.m.mul_to(&x, &mut x_next);
            x_next.axpy(r[k], &loop_d.n, 1.0);
        }
        std::mem::swap(&mut x, &mut x_next);

        let zs = sig[SIG_ZS];
        if k > 0
            && zs_prev * zs < 0.0
            && (k as isize - last_event) >= config.debounce_samples as isize
        {
            let pre = DVector::from_fn(n_c, |i, _| x[rs_lo + i]);
            let refined = (k as f64 - 1.0 + zs_prev / (zs_prev - zs)) * dt;
            trace.reset_instants.push(refined);
            trace.reset_sample_indices.push(k);
            trace.reset_states.push((refined, pre.clone()));
            let jumped = &loop_d.a_rho * pre;
            for i in 0..n_c {
                x[rs_lo + i] = jumped[i];
            }
            last_event = k as isize;
        }
        zs_prev = zs;

        let worst = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if worst > DIVERGENCE_GUARD {
            return Err(Error::SimulationDiverged {
                time: k as f64 * dt,
                guard: DIVERGENCE_GUARD,
            });
        }
    }
    Ok(trace)
}

/// Lean sine run used by frequency sweeps: returns
/// `(einf, rinf, resets_per_cycle)` over the measure window without
/// materializing channel arrays.
fn sine_run_counters(
    loop_d: &DiscreteLoop,
    fs: f64,
    frequency_hz: f64,
    amplitude: f64,
    transient_cycles: usize,
    measure_cycles: usize,
    debounce: usize,
) -> Result<(f64, f64, f64)> {
    let spp = fs / frequency_hz;
    let total = (spp * (transient_cycles + measure_cycles) as f64).round() as usize;
    let k0 = (spp * transient_cycles as f64).round() as usize;
    let w = 2.0 * std::f64::consts::PI * frequency_hz;
    let dt = 1.0 / fs;

    let mut x = DVector::<f64>::zeros(loop_d.nx);
    let mut x_next = DVector::<f64>::zeros(loop_d.nx);
    let (rs_lo, rs_hi) = loop_d.reset_span;
    let n_c = rs_hi - rs_lo;
    let mut zs_prev = 0.0_f64;
    let mut last_event: isize = isize::MIN / 2;
    let mut einf = 0.0_f64;
    let mut rinf = 0.0_f64;
    let mut event_count = 0usize;

    for k in 0..total {
        let rk = amplitude * (w * k as f64 * dt).sin();
        let mut e = loop_d.sr[SIG_E] * rk;
        let mut zs = loop_d.sr[SIG_ZS] * rk;
        for col in 0..loop_d.nx {
            e += loop_d.sx[(SIG_E, col)] * x[col];
            zs += loop_d.sx[(SIG_ZS, col)] * x[col];
        }
        if k >= k0 {
            einf = einf.max(e.abs());
            rinf = rinf.max(rk.abs());
        }
        loop_d.m.mul_to(&x, &mut x_next);
        x_next.axpy(rk, &loop_d.n, 1.0);
        std::mem::swap(&mut x, &mut x_next);
        if k > 0 && zs_prev * zs < 0.0 && (k as isize - last_event) >= debounce as isize {
            if n_c == 1 {
                x[rs_lo] = loop_d.a_rho[(0, 0)] * x[rs_lo];
            } else {
                let pre = DVector::from_fn(n_c, |i, _| x[rs_lo + i]);
                let jumped = &loop_d.a_rho * pre;
                for i in 0..n_c {
                    x[rs_lo + i] = jumped[i];
                }
            }
            if k >= k0 {
                event_count += 1;
            }
            last_event = k as isize;
        }
        zs_prev = zs;
        let worst = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if worst > DIVERGENCE_GUARD {
            return Err(Error::SimulationDiverged {
                time: k as f64 * dt,
                guard: DIVERGENCE_GUARD,
            });
        }
    }
    Ok((einf, rinf, event_count as f64 / measure_cycles as f64))
}

/// Computes steady-state measurements over the trace's measure window.
pub fn metrics(trace: &SimulationTrace, config: &SimulationConfig) -> SteadyStateMetrics {
    let k0 = trace.measure_start.min(trace.e.len());
    let window = &trace.e[k0..];
    let einf = window.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let rinf = trace.r[k0..].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let einf_over_rinf = if rinf > 0.0 { Some(einf / rinf) } else { None };
    let late_events = trace
        .reset_sample_indices
        .iter()
        .filter(|&&k| k >= k0)
        .count();
    let resets_per_cycle = match &config.input {
        InputSignal::Sine { .. } => late_events as f64 / config.measure_cycles as f64,
        _ => late_events as f64,
    };
    let (lo, hi) = window.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let oscillation_amplitude = if window.is_empty() { 0.0 } else { (hi - lo) / 2.0 };
    let limit_cycle = match &config.input {
        InputSignal::Step { amplitude, .. } => {
            detect_limit_cycle(trace, *amplitude).limit_cycle
        }
        _ => false,
    };
    SteadyStateMetrics {
        einf,
        einf_over_rinf,
        resets_per_cycle,
        limit_cycle,
        oscillation_amplitude,
    }
}

/// Examines the trailing quarter of a step-response trace for a sustained
/// limit cycle: at least three persistent reset events with a periodic
/// spacing pattern (coefficient of variation below 10%) and a peak-to-peak
/// error oscillation above 1% of the step amplitude.
///
/// Spacing regularity tolerates multi-event periods: some limit cycles fire
/// a short/long pair of gaps each period, so the CV is taken as the minimum
/// over group sizes 1..=4 of the CV of sums of consecutive non-overlapping
/// gap groups (group sizes with fewer than three complete groups are
/// skipped). Dither-driven noise events stay above the threshold under
/// every grouping — averaging m independent gaps shrinks their CV only by
/// √m — and also fail the amplitude gate.
pub fn detect_limit_cycle(trace: &SimulationTrace, step_amplitude: f64) -> LimitCycleVerdict {
    let n = trace.t.len();
    let w0 = n.saturating_sub(n / 4);
    let t_start = if w0 < n { trace.t[w0] } else { f64::INFINITY };
    let late: Vec<f64> = trace
        .reset_instants
        .iter()
        .copied()
        .filter(|&t| t >= t_start)
        .collect();
    let window = &trace.e[w0.min(n)..];
    let (lo, hi) = window.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let p2p = if window.is_empty() { 0.0 } else { hi - lo };
    let p2p_over_amplitude = if step_amplitude != 0.0 {
        p2p / step_amplitude.abs()
    } else {
        f64::INFINITY
    };
    let spacing_cv = if late.len() >= 3 {
        let gaps: Vec<f64> = late.windows(2).map(|w| w[1] - w[0]).collect();
        let cv_of = |xs: &[f64]| -> Option<f64> {
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
            (mean > 0.0).then(|| var.sqrt() / mean)
        };
        (1..=4usize)
            .filter_map(|m| {
                let groups: Vec<f64> =
                    gaps.chunks_exact(m).map(|c| c.iter().sum()).collect();
                if groups.len() >= 3 { cv_of(&groups) } else { None }
            })
            .min_by(|a, b| a.total_cmp(b))
    } else {
        None
    };
    let limit_cycle = late.len() >= 3
        && spacing_cv.is_some_and(|cv| cv < 0.10)
        && p2p_over_amplitude > 0.01;
    LimitCycleVerdict {
        limit_cycle,
        late_resets: late.len(),
        spacing_cv,
        p2p_over_amplitude,
    }
}

/// Simulates a step of the given amplitude with a deterministic dither
/// (σ = 10⁻⁶ × amplitude, seeded) and returns the trace with its
/// limit-cycle verdict.
///
/// # Errors
/// As [`simulate`].
pub fn step_response(
    topology: &LoopTopology,
    amplitude: f64,
    duration_s: f64,
) -> Result<(SimulationTrace, LimitCycleVerdict)> {
    let mut config = SimulationConfig::step(amplitude, duration_s);
    let sigma = DITHER_RELATIVE_SIGMA * amplitude.abs();
    if sigma > 0.0 {
        config.noise = Some(NoiseSpec {
            power: sigma * sigma / config.sample_rate_hz,
            seed: DITHER_SEED,
        });
    }
    let trace = simulate(topology, &config)?;
    let verdict = detect_limit_cycle(&trace, amplitude);
    Ok((trace, verdict))
}

/// Sweeps sine inputs over `[f_lo, f_hi]` Hz (step `step_hz`, frequencies
/// in parallel), counts steady-state resets per cycle, and reports the
/// highest frequency whose count is above 2.5 while the next grid point is
/// at or below 2.5.
///
/// # Errors
/// Only topology discretization can fail the sweep; per-frequency failures
/// are recorded in the report.
pub fn boundary_frequency_sim(
    topology: &LoopTopology,
    f_lo_hz: f64,
    f_hi_hz: f64,
    step_hz: f64,
    amplitude: f64,
) -> Result<SimBoundaryReport> {
    assert!(
        f_lo_hz > 0.0 && f_hi_hz > f_lo_hz && step_hz > 0.0,
        "boundary sweep requires 0 < f_lo < f_hi and step > 0"
    );
    if !topology.bls_sensitivity()?.is_hurwitz() {
        return Err(Error::UnstableBaseLoop);
    }
    let defaults = SimulationConfig::sine(1.0, 1.0);
    let loop_d = DiscreteLoop::build(topology, defaults.sample_rate_hz)?;
    let mut grid_hz = Vec::new();
    let mut f = f_lo_hz;
    while f <= f_hi_hz * (1.0 + 1e-12) {
        grid_hz.push(f);
        f = f_lo_hz + step_hz * grid_hz.len() as f64;
    }
    let results: Vec<Result<f64>> = grid_hz
        .par_iter()
        .map(|&hz| {
            sine_run_counters(
                &loop_d,
                defaults.sample_rate_hz,
                hz,
                amplitude,
                defaults.transient_cycles,
                defaults.measure_cycles,
                defaults.debounce_samples,
            )
            .map(|(_, _, rpc)| rpc)
        })
        .collect();

    let mut resets_per_cycle = Vec::new();
    let mut failures = Vec::new();
    let mut per_point: Vec<Option<f64>> = Vec::with_capacity(grid_hz.len());
    for (hz, res) in grid_hz.iter().zip(results) {
        match res {
            Ok(rpc) => {
                per_point.push(Some(rpc));
                resets_per_cycle.push((*hz, rpc));
            }
            Err(e) => {
                per_point.push(None);
                failures.push((*hz, e.to_string()));
            }
        }
    }
    let mut transitions = Vec::new();
    for k in 0..grid_hz.len().saturating_sub(1) {
        if let (Some(hi), Some(lo)) = (per_point[k], per_point[k + 1]) {
            if hi > TWO_RESET_DEBOUNCE && lo <= TWO_RESET_DEBOUNCE {
                transitions.push(grid_hz[k]);
            }
        }
    }
    let boundary_hz = transitions.last().copied();
    Ok(SimBoundaryReport {
        grid_hz,
        resets_per_cycle,
        transitions,
        boundary_hz,
        failures,
    })
}

/// Steady-state value of the trigger signal for a unit step, by the
/// final-value theorem on the composed rational `C_s · C₁ · S_bl`
/// (cancellable `s` factors resolved symbolically).
///
/// # Errors
/// Composition failures propagate.
pub fn final_value_zs(topology: &LoopTopology) -> Result<FinalValue> {
    let composed = topology
        .cs
        .series(&topology.c1)?
        .series(&topology.bls_sensitivity()?)?;
    Ok(match composed.limit_at_zero() {
        LimitAtZero::Finite(v) | LimitAtZero::ZeroOverZeroResolved(v) => {
            if v == 0.0 {
                FinalValue::Zero
            } else {
                FinalValue::Finite(v)
            }
        }
        LimitAtZero::Infinite => FinalValue::Divergent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::RationalTransferFunction;
    use crate::reset_core::ResetElement;
    use approx::assert_relative_eq;

    fn plant() -> RationalTransferFunction {
        RationalTransferFunction::new(&[6.615e5], &[5.837e5, 279.4, 83.57]).unwrap()
    }

    /// The benchmark loop also used by the detection tests (Clegg element,
    /// lead-lag compensation, parallel through-path).
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

    #[test]
    fn fixture_trace_matches_pure_linear_stepping() {
        // With the identity jump the hybrid path must reproduce a plain
        // linear recurrence sample-for-sample.
        let mut topo = sample_topology(0.0);
        topo.reset = ResetElement::linear_integrator_fixture(125.7);
        let config = SimulationConfig::sine(1.0, 20.0);
        let trace = simulate(&topo, &config).unwrap();

        let loop_d = DiscreteLoop::build(&topo, config.sample_rate_hz).unwrap();
        let mut x = DVector::<f64>::zeros(loop_d.nx);
        let w = 2.0 * std::f64::consts::PI * 20.0;
        for k in 0..trace.t.len() {
            let rk = (w * k as f64 / config.sample_rate_hz).sin();
            let mut e = loop_d.sr[SIG_E] * rk;
            for col in 0..loop_d.nx {
                e += loop_d.sx[(SIG_E, col)] * x[col];
            }
            assert!(
                (e - trace.e[k]).abs() <= 1e-9,
                "divergence from linear stepping at sample {k}"
            );
            x = &loop_d.m * x + &loop_d.n * rk;
        }
    }

    #[test]
    fn two_reset_regime_counts_two_per_cycle() {
        let topo = sample_topology(0.0);
        let config = SimulationConfig::sine(1.0, 45.0);
        let trace = simulate(&topo, &config).unwrap();
        let m = metrics(&trace, &config);
        assert_relative_eq!(m.resets_per_cycle, 2.0);
        assert!(m.einf_over_rinf.is_some());
    }

    #[test]
    fn multiple_reset_regime_counts_more() {
        let topo = sample_topology(0.0);
        let config = SimulationConfig::sine(1.0, 10.0);
        let trace = simulate(&topo, &config).unwrap();
        let m = metrics(&trace, &config);
        assert!(
            m.resets_per_cycle > 2.5,
            "expected bursts, got {}",
            m.resets_per_cycle
        );
    }

    #[test]
    fn trigger_changes_sign_across_every_event() {
        let topo = sample_topology(0.0);
        let trace = simulate(&topo, &SimulationConfig::sine(1.0, 25.0)).unwrap();
        assert!(!trace.reset_sample_indices.is_empty());
        for &k in &trace.reset_sample_indices {
            assert!(k >= 1);
            assert!(
                trace.z_s[k - 1] * trace.z_s[k] < 0.0,
                "no sign change at sample {k}"
            );
        }
    }

    #[test]
    fn two_reset_events_pair_across_half_cycles() {
        let topo = sample_topology(0.0);
        let config = SimulationConfig::sine(1.0, 45.0);
        let trace = simulate(&topo, &config).unwrap();
        let half = 0.5 / 45.0;
        let tol = 2.0 / config.sample_rate_hz;
        let t0 = trace.t[trace.measure_start];
        let late: Vec<f64> = trace
            .reset_instants
            .iter()
            .copied()
            .filter(|&t| t >= t0)
            .collect();
        for &t in late.iter().take(late.len().saturating_sub(1)) {
            let partner = late
                .iter()
                .map(|&s| (s - (t + half)).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(partner <= tol, "no half-cycle partner for event at {t}");
        }
    }

    #[test]
    fn sim_boundary_matches_known_value_for_the_sample_loop() {
        let topo = sample_topology(0.0);
        let report = boundary_frequency_sim(&topo, 30.0, 45.0, 1.0, 1.0).unwrap();
        assert!(report.failures.is_empty());
        // Independently frozen for this loop.
        assert_eq!(report.boundary_hz, Some(39.0));
    }

    #[test]
    fn lean_counters_agree_with_full_trace() {
        let topo = sample_topology(0.3);
        let config = SimulationConfig::sine(1.0, 20.0);
        let trace = simulate(&topo, &config).unwrap();
        let m = metrics(&trace, &config);
        let loop_d = DiscreteLoop::build(&topo, config.sample_rate_hz).unwrap();
        let (einf, rinf, rpc) = sine_run_counters(
            &loop_d,
            config.sample_rate_hz,
            20.0,
            1.0,
            config.transient_cycles,
            config.measure_cycles,
            config.debounce_samples,
        )
        .unwrap();
        assert_relative_eq!(einf / rinf, m.einf_over_rinf.unwrap(), max_relative = 1e-12);
        assert_relative_eq!(rpc, m.resets_per_cycle);
    }

    #[test]
    fn zero_reference_reports_absolute_error_only() {
        let topo = sample_topology(0.0);
        let config = SimulationConfig {
            input: InputSignal::Samples(vec![0.0; 5000]),
            ..SimulationConfig::sine(1.0, 10.0)
        };
        let trace = simulate(&topo, &config).unwrap();
        let m = metrics(&trace, &config);
        assert!(m.einf_over_rinf.is_none());
        assert_eq!(m.einf, 0.0);
    }

    #[test]
    fn unstable_base_loop_is_refused() {
        let mut topo = sample_topology(0.0);
        // Flip the loop sign: 1 + L now has right-half-plane zeros.
        topo.c3 = RationalTransferFunction::constant(-1.0)
            .series(&topo.c3)
            .unwrap();
        let err = simulate(&topo, &SimulationConfig::sine(1.0, 10.0)).unwrap_err();
        assert!(matches!(err, Error::UnstableBaseLoop));
    }

    #[test]
    fn algebraic_loop_falls_back_to_one_sample_delay() {
        // All-feedthrough loop with cycle product −1: e = r − y, y = −e has
        // no unique per-sample solution, so the delayed path must engage.
        let topo = LoopTopology {
            c1: RationalTransferFunction::one(),
            c2: RationalTransferFunction::constant(-1.0),
            c3: RationalTransferFunction::one(),
            c4: RationalTransferFunction::one(),
            cs: RationalTransferFunction::one(),
            plant: RationalTransferFunction::one(),
            reset: ResetElement::clegg(0.0, 0.0).unwrap(),
        };
        let loop_d = DiscreteLoop::build(&topo, 1.0e4).unwrap();
        assert!(loop_d.delayed);
        // Step the delayed recurrence directly; signals must stay finite.
        let mut x = DVector::<f64>::zeros(loop_d.nx);
        let mut y_prev = 0.0;
        for _ in 0..100 {
            let sig = loop_d.signals_delayed(&x, 1.0, y_prev);
            assert!(sig.iter().all(|v| v.is_finite()));
            let svec = DVector::from_row_slice(&sig);
            x = &loop_d.ablk * &x + &loop_d.bstack * svec;
            y_prev = sig[SIG_Y];
        }
    }

    #[test]
    fn settled_step_has_no_limit_cycle() {
        let mut topo = sample_topology(0.0);
        topo.reset = ResetElement::linear_integrator_fixture(125.7);
        let (_, verdict) = step_response(&topo, 1.0, 2.0).unwrap();
        assert!(!verdict.limit_cycle);
    }

    #[test]
    fn final_value_classification() {
        // Integrating forward path: S_bl(0) = 0 so the limit is zero.
        let topo = sample_topology(0.0);
        assert_eq!(final_value_zs(&topo).unwrap(), FinalValue::Zero);

        // Integrating trigger shaper: the 1/s cancels the S_bl zero and
        // leaves a nonzero constant.
        let mut shaped = sample_topology(0.0);
        shaped.cs = RationalTransferFunction::integrator(1.0);
        match final_value_zs(&shaped).unwrap() {
            FinalValue::Finite(v) => assert!(v != 0.0),
            other => panic!("expected finite limit, got {other:?}"),
        }

        // No integrator anywhere: plain finite sensitivity value.
        let flat = LoopTopology {
            c1: RationalTransferFunction::one(),
            c2: RationalTransferFunction::constant(0.0),
            c3: RationalTransferFunction::one(),
            c4: RationalTransferFunction::one(),
            cs: RationalTransferFunction::one(),
            plant: RationalTransferFunction::new(&[1.0], &[1.0, 1.0]).unwrap(),
            reset: ResetElement::new(
                DMatrix::from_element(1, 1, -1.0),
                DMatrix::from_element(1, 1, 1.0),
                DMatrix::from_element(1, 1, 1.0),
                0.0,
                0.5,
            )
            .unwrap(),
        };
        match final_value_zs(&flat).unwrap() {
            FinalValue::Finite(v) => assert!(v != 0.0),
            other => panic!("expected finite limit, got {other:?}"),
        }
    }

    #[test]
    fn u_channel_is_the_compensator_driven_by_v() {
        // Reconstruct u independently: feed the recorded v through a fresh
        // discretization of C₃ and compare sample-for-sample.
        let topo = sample_topology(0.0);
        let config = SimulationConfig::sine(1.0, 40.0);
        let trace = simulate(&topo, &config).unwrap();
        let obs = tustin(&tf_to_ss(&topo.c3).unwrap(), config.sample_rate_hz).unwrap();
        let mut x = DVector::<f64>::zeros(obs.order());
        for k in 0..trace.t.len() {
            let u = (obs.c() * &x)[(0, 0)] + obs.d()[(0, 0)] * trace.v[k];
            assert!(
                (u - trace.u[k]).abs() <= 1e-9 * u.abs().max(1.0),
                "u mismatch at sample {k}: {} vs {}",
                u,
                trace.u[k]
            );
            x = obs.a() * &x + obs.b() * trace.v[k];
        }
    }

    #[test]
    fn doubling_the_rate_barely_moves_the_error_ratio() {
        let topo = sample_topology(0.0);
        let base = SimulationConfig::sine(1.0, 45.0);
        let mut fine = base.clone();
        fine.sample_rate_hz = 2.0e4;
        let m1 = metrics(&simulate(&topo, &base).unwrap(), &base);
        let m2 = metrics(&simulate(&topo, &fine).unwrap(), &fine);
        let (r1, r2) = (m1.einf_over_rinf.unwrap(), m2.einf_over_rinf.unwrap());
        assert!(
            (r1 - r2).abs() / r1 < 0.02,
            "rate sensitivity too high: {r1} vs {r2}"
        );
        assert_relative_eq!(m2.resets_per_cycle, 2.0);
    }
}
