//! High-order harmonic content of the closed reset loop.
//!
//! A sinusoid of frequency ω driving the loop produces a trigger signal
//! `z_s` that splits into a base-linear part (the response the loop would
//! have with the element's jumps disabled) and a nonlinear remainder
//! created by the jumps. The remainder is a sum of odd harmonics. This
//! module quantifies them three ways:
//!
//! - **Kernel route** — the composite rational `T_β(ω) = T_α(ω)·jω`
//!   ([`t_beta`]) measures how strongly the loop transfers each jump into
//!   the trigger; the harmonic ratio β_n ([`beta_n`]) compares its shaped
//!   magnitude at `nω` against the first harmonic, and
//!   [`target_shaper_magnitude`] inverts a chosen ceiling σ_β into a
//!   magnitude target for the trigger shaper.
//! - **Event route** — given the reset instants and pre-jump states of a
//!   steady cycle (folded by [`half_cycle_reset_states`]), the jumps form
//!   a stair-step waveform whose order-n spectral coefficient
//!   ([`stair_step_spectrum`]) composes with the kernel into an analytic
//!   harmonic magnitude, cross-validated against simulation.
//! - **Trace route** — [`harmonic_decompose`] extracts exact-bin harmonic
//!   amplitudes (rectangular window over an integer period count, so the
//!   bins are leakage-free) and a Welch-averaged power spectral density
//!   from any recorded channel of a simulation trace.
//!
//! # Jump-factor convention
//!
//! Both the kernel row (`t_alpha` of
//! [`crate::multireset::composite_kernel_tf`]) and the stair-step spectrum
//! carry the jump-map factor `A_ρ − I` (scalar `γ − 1` in the first state
//! component, the only one the jump touches). The simulation-validated
//! harmonic magnitude carries the factor exactly once:
//! `|Z_nⁿ| = |C_s(nω) T_β(nω) D_sⁿ(ω)| / |γ − 1|`. For `γ = 0` the factor
//! has unit magnitude and the division is a no-op; harmonic *ratios*
//! cancel it entirely. The tests pin both forms against the simulator.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linsys::RationalTransferFunction;
use crate::multireset::composite_kernel_tf;
use crate::reset_core::LoopTopology;
use crate::simulator::{SimulationTrace, TraceChannel};

/// Magnitudes below this are treated as a vanished first harmonic.
const FIRST_HARMONIC_FLOOR: f64 = 1e-300;

/// Relative mismatch above which a window's period count is rejected as
/// non-integer.
const PERIOD_COUNT_TOLERANCE: f64 = 1e-4;

// ---------------------------------------------------------------------------
// Domain types.

/// The harmonic ratio β_n(ω): order-n trigger harmonic relative to the
/// first, as predicted by the shaped kernel.
#[derive(Clone, Copy, Debug)]
pub struct HarmonicRatio {
    /// Angular frequency of the first harmonic, rad/s.
    pub frequency: f64,
    /// Harmonic order `n ≥ 2`.
    pub order: u32,
    /// `|C_s(nω) T_β(nω)| / (n |C_s(ω) T_β(ω)|) ≥ 0`.
    pub beta: f64,
}

/// Spectral content extracted from one trace channel.
#[derive(Clone, Debug)]
pub struct SpectrumReport {
    /// First-harmonic frequency, Hz.
    pub base_frequency_hz: f64,
    /// Exact-bin amplitude (input units) per harmonic order.
    pub harmonic_magnitudes: BTreeMap<u32, f64>,
    /// Welch-averaged one-sided power spectral density as `(Hz, power/Hz)`
    /// pairs, for plotting.
    pub psd: Vec<(f64, f64)>,
}

impl SpectrumReport {
    /// Amplitudes normalized so the first harmonic is 1; empty if the
    /// first harmonic underflowed.
    pub fn normalized(&self) -> BTreeMap<u32, f64> {
        match self.harmonic_magnitudes.get(&1) {
            Some(&first) if first > FIRST_HARMONIC_FLOOR => self
                .harmonic_magnitudes
                .iter()
                .map(|(&order, &amp)| (order, amp / first))
                .collect(),
            _ => BTreeMap::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Kernel route.

fn kernel_row(rows: &[RationalTransferFunction], omega: f64) -> Result<Vec<Complex64>> {
    rows.iter().map(|r| r.eval(omega)).collect()
}

fn row_norm(row: &[Complex64]) -> f64 {
    row.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// The nonlinear trigger kernel `T_β(ω) = T_α(ω)·jω`, where `T_α` is the
/// composite output kernel of [`composite_kernel_tf`] (it carries the
/// jump-map factor; identity-jump fixtures give identically zero).
///
/// For single-state elements the row is a scalar and the full complex
/// value is returned; for `n_c > 1` the row is contracted to its Euclidean
/// norm (times ω), returned as a real complex number — only `|T_β|` is
/// defined in that case.
///
/// # Panics
/// Panics unless `ω > 0`.
///
/// # Errors
/// Kernel composition and evaluation failures propagate.
pub fn t_beta(topology: &LoopTopology, omega: f64) -> Result<Complex64> {
    assert!(omega > 0.0, "t_beta requires omega > 0");
    let kernels = composite_kernel_tf(topology)?;
    let row = kernel_row(&kernels.t_alpha, omega)?;
    if row.len() == 1 {
        Ok(row[0] * Complex64::new(0.0, omega))
    } else {
        Ok(Complex64::new(row_norm(&row) * omega, 0.0))
    }
}

/// The harmonic ratio `β_n(ω) = |C_s(nω) T_β(nω)| / (n |C_s(ω) T_β(ω)|)`,
/// evaluated on the shaped kernel row (`n_c > 1` rows contract to their
/// Euclidean norm).
///
/// # Panics
/// Panics unless `ω > 0` and `n ≥ 2`.
///
/// # Errors
/// [`Error::DegenerateFirstHarmonic`] if the first-harmonic magnitude
/// underflows; composition and evaluation failures propagate.
pub fn beta_n(topology: &LoopTopology, omega: f64, n: u32) -> Result<HarmonicRatio> {
    assert!(omega > 0.0, "beta_n requires omega > 0");
    assert!(n >= 2, "beta_n requires order n >= 2");
    let kernels = composite_kernel_tf(topology)?;
    let omega_n = n as f64 * omega;
    let numerator = row_norm(&kernel_row(&kernels.cs_t_alpha, omega_n)?) * omega_n;
    let denominator = n as f64 * row_norm(&kernel_row(&kernels.cs_t_alpha, omega)?) * omega;
    if denominator < FIRST_HARMONIC_FLOOR {
        return Err(Error::DegenerateFirstHarmonic { omega });
    }
    Ok(HarmonicRatio {
        frequency: omega,
        order: n,
        beta: numerator / denominator,
    })
}

/// The trigger-shaper magnitude `|C_s(ω)| = n·σ_β/|T_β(ω)|` that would cap
/// the order-n harmonic ratio at σ_β, assuming the shaper's magnitude at
/// `nω` is held fixed while the value at ω is set. Emitted over a grid to
/// guide shaper fitting; the achieved ratio must be confirmed post-hoc via
/// [`beta_n`], which is also scale-invariant in `C_s` — the target's
/// absolute level is a free normalization.
///
/// # Panics
/// Panics unless `ω > 0`, `σ_β ∈ (0, 1)`, and `n ≥ 2`.
///
/// # Errors
/// [`Error::DegenerateFirstHarmonic`] if `|T_β(ω)|` underflows.
pub fn target_shaper_magnitude(
    topology: &LoopTopology,
    omega: f64,
    sigma_beta: f64,
    n: u32,
) -> Result<f64> {
    assert!(omega > 0.0, "target_shaper_magnitude requires omega > 0");
    assert!(
        sigma_beta > 0.0 && sigma_beta < 1.0,
        "target_shaper_magnitude requires sigma_beta in (0, 1)"
    );
    assert!(n >= 2, "target_shaper_magnitude requires order n >= 2");
    let kernels = composite_kernel_tf(topology)?;
    let magnitude = row_norm(&kernel_row(&kernels.t_alpha, omega)?) * omega;
    if magnitude < FIRST_HARMONIC_FLOOR {
        return Err(Error::DegenerateFirstHarmonic { omega });
    }
    Ok(n as f64 * sigma_beta / magnitude)
}

// ---------------------------------------------------------------------------
// Event route.

/// The order-n spectral coefficient of the jump stair-step,
/// `D_sⁿ = (2(γ−1)/(nπ)) Σᵢ x(tᵢ)₁ e^{−j n ω tᵢ}`, from the pre-jump
/// states of one steady half-cycle.
///
/// The jump map `A_ρ − I` zeroes every component of `(A_ρ − I)x` except
/// the first, so the coefficient is returned as that scalar. See the
/// module notes on the jump-factor convention when composing with the
/// kernel row.
///
/// # Panics
/// Panics unless `ω > 0` and `n ≥ 1`; debug builds also check that every
/// instant lies in the half-cycle `(0, π/ω]`.
///
/// # Errors
/// [`Error::EmptyResetSet`] if no reset events were supplied.
pub fn stair_step_spectrum(
    reset_states: &[(f64, DVector<f64>)],
    gamma: f64,
    omega: f64,
    n: u32,
) -> Result<Complex64> {
    assert!(omega > 0.0, "stair_step_spectrum requires omega > 0");
    assert!(n >= 1, "stair_step_spectrum requires order n >= 1");
    if reset_states.is_empty() {
        return Err(Error::EmptyResetSet);
    }
    let half_cycle = PI / omega;
    let mut sum = Complex64::new(0.0, 0.0);
    for (instant, state) in reset_states {
        debug_assert!(
            *instant > 0.0 && *instant <= half_cycle * (1.0 + 1e-9),
            "reset instants must fold into (0, π/ω], got {instant}"
        );
        sum += state[0] * Complex64::from_polar(1.0, -(n as f64) * omega * instant);
    }
    Ok(sum * (2.0 * (gamma - 1.0) / (n as f64 * PI)))
}

/// Folds a trace's reset events into the first half of its last complete
/// input period: events in `[(c−1)·P, c·P)` (where `c·P` is the final full
/// period boundary before the trace ends) are shifted to `τ = t − (c−1)·P`
/// and kept when `τ ≤ P/2`. The second half-cycle mirrors the first for
/// the odd-harmonic stair-step, so half the events suffice. Returns
/// `(τ, pre-jump state)` pairs sorted by τ; empty when the trace holds no
/// complete period or no events landed in the window.
///
/// # Panics
/// Panics unless `base_hz > 0`.
pub fn half_cycle_reset_states(
    trace: &SimulationTrace,
    base_hz: f64,
) -> Vec<(f64, DVector<f64>)> {
    assert!(base_hz > 0.0, "half_cycle_reset_states requires base_hz > 0");
    let period = 1.0 / base_hz;
    let t_end = match trace.t.last() {
        Some(&t) => t,
        None => return Vec::new(),
    };
    let complete = (t_end / period).floor();
    if complete < 1.0 {
        return Vec::new();
    }
    let start = (complete - 1.0) * period;
    let mut folded: Vec<(f64, DVector<f64>)> = trace
        .reset_states
        .iter()
        .filter(|(t, _)| *t >= start && *t < start + period)
        .map(|(t, state)| (t - start, state.clone()))
        .filter(|(tau, _)| *tau > 0.0 && *tau <= period / 2.0 + 1e-12)
        .collect();
    folded.sort_by(|a, b| a.0.total_cmp(&b.0));
    folded
}

// ---------------------------------------------------------------------------
// Trace route.

/// Extracts harmonic amplitudes and a PSD from one channel of a trace.
///
/// The steady-state window (`measure_start` onward) must contain an
/// integer number of base periods to within 0.01% — the harmonic bins are
/// then exact DFT bins of a rectangular window, free of leakage — and at
/// least 10 of them. Amplitudes are reported for orders `1..=max_order`
/// in the channel's units. The PSD is Welch-averaged for plotting:
/// two-period segments, 50% overlap, periodic Hann window, one-sided
/// density normalization.
///
/// # Panics
/// Panics unless `base_hz > 0`, `max_order ≥ 1`, the highest requested
/// order lies below the Nyquist frequency, and the window covers ≥ 10
/// periods.
///
/// # Errors
/// [`Error::NonIntegerPeriods`] if the window's period count is not an
/// integer within tolerance.
pub fn harmonic_decompose(
    trace: &SimulationTrace,
    channel: TraceChannel,
    base_hz: f64,
    max_order: u32,
) -> Result<SpectrumReport> {
    assert!(base_hz > 0.0, "harmonic_decompose requires base_hz > 0");
    assert!(max_order >= 1, "harmonic_decompose requires max_order >= 1");
    let fs = trace.sample_rate_hz;
    assert!(
        max_order as f64 * base_hz < fs / 2.0,
        "requested orders must stay below the Nyquist frequency"
    );
    let samples = trace.channel(channel);
    let window = &samples[trace.measure_start.min(samples.len())..];
    let count = window.len();
    let periods = count as f64 * base_hz / fs;
    let rounded = periods.round();
    if rounded < 1.0 || (periods / rounded - 1.0).abs() > PERIOD_COUNT_TOLERANCE {
        return Err(Error::NonIntegerPeriods { periods });
    }
    assert!(
        rounded >= 10.0,
        "decomposition window must cover at least 10 periods, got {rounded}"
    );
    let periods = rounded as usize;

    let mut harmonic_magnitudes = BTreeMap::new();
    for order in 1..=max_order {
        let bin = order as usize * periods;
        let step = -2.0 * PI * bin as f64 / count as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &v) in window.iter().enumerate() {
            acc += v * Complex64::from_polar(1.0, step * j as f64);
        }
        harmonic_magnitudes.insert(order, 2.0 * acc.norm() / count as f64);
    }

    Ok(SpectrumReport {
        base_frequency_hz: base_hz,
        harmonic_magnitudes,
        psd: welch_psd(window, fs, base_hz),
    })
}

/// Welch-averaged one-sided PSD: segment length two base periods (capped
/// by the window), 50% overlap, periodic Hann window, density
/// normalization `1/(f_s Σw²)` with interior bins doubled.
fn welch_psd(window: &[f64], fs: f64, base_hz: f64) -> Vec<(f64, f64)> {
    let count = window.len();
    let segment = ((2.0 * fs / base_hz).round() as usize).clamp(2, count);
    let hop = (segment / 2).max(1);
    let hann: Vec<f64> = (0..segment)
        .map(|j| 0.5 * (1.0 - (2.0 * PI * j as f64 / segment as f64).cos()))
        .collect();
    let energy: f64 = hann.iter().map(|w| w * w).sum();
    let bins = segment / 2 + 1;
    let nyquist_bin = if segment % 2 == 0 { bins - 1 } else { bins };
    let mut power = vec![0.0; bins];
    let mut averaged = 0usize;
    let mut offset = 0usize;
    while offset + segment <= count {
        let shaped: Vec<f64> = window[offset..offset + segment]
            .iter()
            .zip(&hann)
            .map(|(v, w)| v * w)
            .collect();
        for (k, slot) in power.iter_mut().enumerate() {
            let rotor = Complex64::from_polar(1.0, -2.0 * PI * k as f64 / segment as f64);
            let mut phase = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for &v in &shaped {
                acc += v * phase;
                phase *= rotor;
            }
            let one_sided = if k == 0 || k == nyquist_bin { 1.0 } else { 2.0 };
            *slot += one_sided * acc.norm_sqr() / (fs * energy);
        }
        averaged += 1;
        offset += hop;
    }
    if averaged == 0 {
        return Vec::new();
    }
    power
        .iter()
        .enumerate()
        .map(|(k, p)| (k as f64 * fs / segment as f64, p / averaged as f64))
        .collect()
}
