//! The reset element, its base-linear controller, and the loop topology.
//!
//! A reset element is a hybrid system: between resets its state flows as a
//! plain LTI controller,
//!
//! ```text
//! ẋ_c = A_R x_c + B_R z,    u_r = C_R x_c + D_R z,
//! ```
//!
//! and whenever the (shaped) trigger signal crosses zero the state jumps,
//!
//! ```text
//! x_c(t⁺) = A_ρ x_c(t),    A_ρ = diag(γ, 1, …, 1),    γ ∈ (−1, 1).
//! ```
//!
//! Ignoring the jumps yields the *base-linear controller* (BLC); closing the
//! loop with the BLC in place of the reset element yields the *base-linear
//! system* (BLS), whose open loop and sensitivity are the backbone of every
//! frequency-domain result in this crate.
//!
//! The loop topology mirrors a standard single-loop layout with shaping
//! slots around the reset element:
//!
//! ```text
//! r ─►(+)── C₁ ──┬── C_s ──► trigger z_s (zero crossings fire the jump)
//!     −▲    z    │
//!      │         ├── reset element ──► m ──(+)── C₃ ── P ──► y
//!      │         └── C₂ ─────────────► a ──(+)▲
//!      └───────────── C₄ ◄────────────────────┴─── y
//! ```
//!
//! `C_s` shapes only the trigger; it never carries signal power into the
//! loop. That asymmetry is what the shaping module exploits.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linsys::{expm, RationalTransferFunction};

/// Default grid for the open-loop jump/flow stability test: 200 log-spaced
/// inter-reset intervals between 0.1 ms and 10 s.
pub fn default_delta_grid() -> Vec<f64> {
    let (lo, hi) = (1e-4_f64, 10.0_f64);
    let n = 200;
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// A reset element: LTI flow matrices plus the scalar jump coefficient.
///
/// The jump matrix `A_ρ = diag(γ, 1, …, 1)` is always derived, never
/// stored. The first state is the resetting one; any remaining states pass
/// through jumps untouched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ResetRepr", into = "ResetFullRepr")]
pub struct ResetElement {
    a_r: DMatrix<f64>,
    b_r: DMatrix<f64>,
    c_r: DMatrix<f64>,
    d_r: f64,
    gamma: f64,
    identity_jump: bool,
}

impl ResetElement {
    /// Builds a reset element from flow matrices and the jump coefficient.
    ///
    /// # Errors
    /// [`Error::InvalidResetCoefficient`] unless `γ ∈ (−1, 1)`;
    /// [`Error::DimensionMismatch`] for inconsistent matrix shapes or
    /// `n_c = 0`.
    pub fn new(
        a_r: DMatrix<f64>,
        b_r: DMatrix<f64>,
        c_r: DMatrix<f64>,
        d_r: f64,
        gamma: f64,
    ) -> Result<Self> {
        if !(gamma > -1.0 && gamma < 1.0) {
            return Err(Error::InvalidResetCoefficient { gamma });
        }
        Self::with_jump(a_r, b_r, c_r, d_r, gamma, false)
    }

    /// Builds a *linear fixture*: the same flow dynamics, but with identity
    /// jumps (`A_ρ = I`), so every "reset" leaves the state untouched.
    ///
    /// This deliberately bypasses the `γ ∈ (−1, 1)` invariant — it is the
    /// `γ = 1` limit — and exists so that linear baselines can run through
    /// exactly the same hybrid machinery as genuine reset controllers.
    /// Simulation runs with a fixture element are labeled linear and are
    /// excluded from reset-counting boundary searches.
    pub fn linear_fixture(
        a_r: DMatrix<f64>,
        b_r: DMatrix<f64>,
        c_r: DMatrix<f64>,
        d_r: f64,
    ) -> Result<Self> {
        Self::with_jump(a_r, b_r, c_r, d_r, 1.0, true)
    }

    fn with_jump(
        a_r: DMatrix<f64>,
        b_r: DMatrix<f64>,
        c_r: DMatrix<f64>,
        d_r: f64,
        gamma: f64,
        identity_jump: bool,
    ) -> Result<Self> {
        let n = a_r.nrows();
        if n == 0 || a_r.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: format!("A_R must be square with n_c >= 1, got {}x{}", n, a_r.ncols()),
            });
        }
        if b_r.nrows() != n || b_r.ncols() != 1 || c_r.nrows() != 1 || c_r.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "B_R must be {n}x1 and C_R 1x{n}, got {}x{} and {}x{}",
                    b_r.nrows(),
                    b_r.ncols(),
                    c_r.nrows(),
                    c_r.ncols()
                ),
            });
        }
        Ok(ResetElement {
            a_r,
            b_r,
            c_r,
            d_r,
            gamma,
            identity_jump,
        })
    }

    /// A scaled Clegg integrator: flow `k/s`, first (only) state scaled by
    /// `γ` at every trigger crossing.
    ///
    /// # Errors
    /// [`Error::InvalidResetCoefficient`] unless `γ ∈ (−1, 1)`.
    pub fn clegg(gain: f64, gamma: f64) -> Result<Self> {
        Self::new(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, gain),
            0.0,
            gamma,
        )
    }

    /// A linear integrator `k/s` dressed as a reset element with identity
    /// jumps (see [`ResetElement::linear_fixture`]).
    pub fn linear_integrator_fixture(gain: f64) -> Self {
        Self::linear_fixture(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, gain),
            0.0,
        )
        .expect("fixed 1-state dimensions are consistent")
    }

    /// Flow state matrix `A_R`.
    pub fn a_r(&self) -> &DMatrix<f64> {
        &self.a_r
    }
    /// Flow input matrix `B_R` (n_c×1).
    pub fn b_r(&self) -> &DMatrix<f64> {
        &self.b_r
    }
    /// Flow output matrix `C_R` (1×n_c).
    pub fn c_r(&self) -> &DMatrix<f64> {
        &self.c_r
    }
    /// Flow feedthrough `D_R`.
    pub fn d_r(&self) -> f64 {
        self.d_r
    }
    /// Jump coefficient `γ` (reported as 1 for linear fixtures).
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    /// True for linear fixtures with identity jumps.
    pub fn is_linear_fixture(&self) -> bool {
        self.identity_jump
    }
    /// State dimension `n_c`.
    pub fn order(&self) -> usize {
        self.a_r.nrows()
    }

    /// The jump matrix `A_ρ = diag(γ, 1, …, 1)` (identity for fixtures).
    pub fn a_rho(&self) -> DMatrix<f64> {
        let n = self.order();
        let mut m = DMatrix::identity(n, n);
        if !self.identity_jump {
            m[(0, 0)] = self.gamma;
        }
        m
    }

    /// The base-linear controller `C_R (sI − A_R)⁻¹ B_R + D_R` as a rational
    /// function, computed by the Leverrier–Faddeev recursion (exact in the
    /// coefficients; `n_c` is small, at most 8 in all presets).
    ///
    /// Common `s^k` factors between numerator and denominator are cancelled
    /// so that, e.g., a pure-feedthrough element yields a constant rather
    /// than `k s / s`.
    pub fn blc(&self) -> RationalTransferFunction {
        let n = self.order();
        let (adj, c) = resolvent_expansion(&self.a_r);
        // num(s) = C adj(sI−A) B + D·den(s), ascending coefficients.
        let mut num = vec![0.0; n + 1];
        for (k, m) in adj.iter().enumerate() {
            let v = (&self.c_r * m * &self.b_r)[(0, 0)];
            num[n - 1 - k] += v;
        }
        for j in 0..=n {
            num[j] += self.d_r * c[j];
        }
        let tf = RationalTransferFunction::new(&num, &c)
            .expect("characteristic polynomial is monic, denominator nonzero");
        // Cancel shared s^k factors (e.g. D-only elements).
        let k = tf
            .num()
            .low_order_zeros()
            .min(tf.den().low_order_zeros());
        if k == 0 || tf.num().is_zero() {
            return tf;
        }
        RationalTransferFunction::new(
            tf.num().shift_down(k).coeffs(),
            tf.den().shift_down(k).coeffs(),
        )
        .expect("cancelling a common factor keeps the denominator nonzero")
    }
}

/// Leverrier–Faddeev expansion of the resolvent of a square matrix:
/// returns the adjugate coefficients `M_k` with
/// `adj(sI − A) = Σ_k M_k s^{n−1−k}` (k = 0…n−1) and the characteristic
/// polynomial in ascending coefficients (monic, length n+1).
///
/// Exact in the coefficient recursion; intended for the small reset-state
/// dimensions used here (n ≤ 8).
pub(crate) fn resolvent_expansion(a: &DMatrix<f64>) -> (Vec<DMatrix<f64>>, Vec<f64>) {
    let n = a.nrows();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m_k = DMatrix::<f64>::identity(n, n);
    let mut adj = Vec::with_capacity(n);
    adj.push(m_k.clone());
    for k in 1..=n {
        let n_mat = a * &m_k;
        let coeff = -n_mat.trace() / k as f64;
        c[n - k] = coeff;
        if k < n {
            m_k = n_mat + coeff * DMatrix::<f64>::identity(n, n);
            adj.push(m_k.clone());
        }
    }
    (adj, c)
}

/// Result of the open-loop jump/flow stability test.
#[derive(Clone, Copy, Debug)]
pub struct ResetStability {
    /// True iff the worst spectral radius over the grid is below 1.
    pub stable: bool,
    /// Largest spectral radius of `A_ρ e^{A_R δ}` found.
    pub worst_radius: f64,
    /// The inter-reset interval δ (seconds) attaining it.
    pub worst_delta: f64,
}

/// Tests open-loop stability of the flow/jump pair: the reset element is
/// stable in open loop iff the spectral radius of `A_ρ e^{A_R δ}` stays
/// below 1 for every inter-reset interval δ > 0.
///
/// The quantifier over all δ is sampled on the provided grid (see
/// [`default_delta_grid`]); this is a sufficient-sampling heuristic, not a
/// proof. The ubiquitous `A_R = 0` family (Clegg-type integrators) is
/// handled exactly: there the radius is `|γ|` independent of δ.
///
/// # Panics
/// Panics if the grid is empty or contains non-positive intervals.
///
/// # Errors
/// Propagates matrix-exponential failures ([`Error::NonFinite`]).
pub fn open_loop_reset_stable(reset: &ResetElement, delta_grid: &[f64]) -> Result<ResetStability> {
    assert!(!delta_grid.is_empty(), "empty delta grid");
    assert!(
        delta_grid.iter().all(|&d| d > 0.0),
        "delta grid must be strictly positive"
    );
    let a_rho = reset.a_rho();
    if reset.a_r().iter().all(|&v| v == 0.0) {
        // e^{A_R δ} = I for all δ: the radius is the largest |diag(A_ρ)|.
        let radius = a_rho.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        return Ok(ResetStability {
            stable: radius < 1.0,
            worst_radius: radius,
            worst_delta: delta_grid[0],
        });
    }
    let mut worst_radius = 0.0;
    let mut worst_delta = delta_grid[0];
    for &delta in delta_grid {
        let m = &a_rho * expm(&(reset.a_r() * delta))?;
        let radius = m
            .complex_eigenvalues()
            .iter()
            .fold(0.0_f64, |acc, ev| acc.max(ev.norm()));
        if radius > worst_radius {
            worst_radius = radius;
            worst_delta = delta;
        }
    }
    Ok(ResetStability {
        stable: worst_radius < 1.0,
        worst_delta,
        worst_radius,
    })
}

/// The closed-loop topology: four shaping/compensation blocks, the trigger
/// shaper, the plant, and the reset element.
///
/// Serializes as JSON with one object per block,
/// `{"c1":{...},…,"plant":{...},"reset":{"A_R":[[…]],…,"gamma":g}}`; the
/// reset element additionally accepts the shorthand
/// `{"reset":{"ci":{"gamma":g}}}` (optionally with `"gain"`) for a Clegg
/// integrator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopTopology {
    /// Error-side shaping block (drives both the trigger and the element).
    pub c1: RationalTransferFunction,
    /// Linear bypass in parallel with the reset element.
    pub c2: RationalTransferFunction,
    /// Post-element compensator driving the plant.
    pub c3: RationalTransferFunction,
    /// Feedback-path block.
    pub c4: RationalTransferFunction,
    /// Trigger shaper: shapes only when the element resets, carries no
    /// signal power into the loop.
    pub cs: RationalTransferFunction,
    /// The plant.
    pub plant: RationalTransferFunction,
    /// The reset element.
    pub reset: ResetElement,
}

impl LoopTopology {
    /// The base-linear open loop `L_bl = C₁ (C_l + C₂) C₃ P C₄`, where
    /// `C_l` is the element's base-linear controller.
    ///
    /// # Errors
    /// [`Error::DegreeOverflow`] if composition exceeds the degree cap.
    pub fn base_loop(&self) -> Result<RationalTransferFunction> {
        let inner = self.reset.blc().parallel(&self.c2)?;
        self.c1
            .series(&inner)?
            .series(&self.c3)?
            .series(&self.plant)?
            .series(&self.c4)
    }

    /// The base-linear sensitivity `S_bl = 1/(1 + L_bl)`.
    ///
    /// # Errors
    /// As [`LoopTopology::base_loop`].
    pub fn bls_sensitivity(&self) -> Result<RationalTransferFunction> {
        self.base_loop()?.sensitivity()
    }

    /// Stability query for the LTI blocks: true iff `C₁…C₄` are all
    /// Hurwitz. The trigger shaper and plant are reported separately by
    /// [`RationalTransferFunction::is_hurwitz`] since integrating shapers
    /// (poles at the origin) are legitimate designs.
    pub fn forward_blocks_hurwitz(&self) -> bool {
        self.c1.is_hurwitz() && self.c2.is_hurwitz() && self.c3.is_hurwitz() && self.c4.is_hurwitz()
    }
}

// ---------------------------------------------------------------------------
// Serialization shims.

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    if nr == 0 || nc == 0 || rows.iter().any(|r| r.len() != nc) {
        return Err(Error::DimensionMismatch {
            context: format!("{what}: ragged or empty matrix rows"),
        });
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

#[derive(Serialize, Deserialize)]
struct ResetFullRepr {
    #[serde(rename = "A_R")]
    a_r: Vec<Vec<f64>>,
    #[serde(rename = "B_R")]
    b_r: Vec<Vec<f64>>,
    #[serde(rename = "C_R")]
    c_r: Vec<Vec<f64>>,
    #[serde(rename = "D_R")]
    d_r: Vec<Vec<f64>>,
    gamma: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    identity_jump: bool,
}

#[derive(Deserialize)]
struct CiRepr {
    gamma: f64,
    #[serde(default = "unit_gain")]
    gain: f64,
}

fn unit_gain() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ResetRepr {
    Ci { ci: CiRepr },
    Full(ResetFullRepr),
}

impl TryFrom<ResetRepr> for ResetElement {
    type Error = Error;
    fn try_from(r: ResetRepr) -> Result<Self> {
        match r {
            ResetRepr::Ci { ci } => ResetElement::clegg(ci.gain, ci.gamma),
            ResetRepr::Full(f) => {
                let a_r = rows_to_matrix(&f.a_r, "A_R")?;
                let b_r = rows_to_matrix(&f.b_r, "B_R")?;
                let c_r = rows_to_matrix(&f.c_r, "C_R")?;
                let d_r = rows_to_matrix(&f.d_r, "D_R")?;
                if d_r.nrows() != 1 || d_r.ncols() != 1 {
                    return Err(Error::DimensionMismatch {
                        context: "D_R must be 1x1".into(),
                    });
                }
                if f.identity_jump {
                    ResetElement::linear_fixture(a_r, b_r, c_r, d_r[(0, 0)])
                } else {
                    ResetElement::new(a_r, b_r, c_r, d_r[(0, 0)], f.gamma)
                }
            }
        }
    }
}

impl From<ResetElement> for ResetFullRepr {
    fn from(r: ResetElement) -> Self {
        ResetFullRepr {
            a_r: matrix_to_rows(&r.a_r),
            b_r: matrix_to_rows(&r.b_r),
            c_r: matrix_to_rows(&r.c_r),
            d_r: vec![vec![r.d_r]],
            gamma: r.gamma,
            identity_jump: r.identity_jump,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn plant() -> RationalTransferFunction {
        RationalTransferFunction::new(&[6.615e5], &[5.837e5, 279.4, 83.57]).unwrap()
    }

    #[test]
    fn rejects_gamma_outside_open_interval() {
        for g in [1.0, -1.0, 1.5, -2.0] {
            assert!(matches!(
                ResetElement::clegg(1.0, g),
                Err(Error::InvalidResetCoefficient { .. })
            ));
        }
        assert!(ResetElement::clegg(1.0, 0.999).is_ok());
    }

    #[test]
    fn clegg_blc_is_scaled_integrator() {
        let blc = ResetElement::clegg(125.66370614359172, 0.0).unwrap().blc();
        // 125.7/s to the display precision used in the benchmark write-ups.
        assert_eq!(blc.den().coeffs(), &[0.0, 1.0]);
        assert_relative_eq!(blc.num().coeffs()[0], 125.7, max_relative = 5e-4);
    }

    #[test]
    fn feedthrough_only_element_has_constant_blc() {
        let r = ResetElement::new(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            4.0,
            0.2,
        )
        .unwrap();
        let blc = r.blc();
        assert_eq!(blc.num().coeffs(), &[4.0]);
        assert_eq!(blc.den().coeffs(), &[1.0]);
    }

    #[test]
    fn blc_matches_direct_resolvent_evaluation() {
        // A generic 3-state element exercises the Leverrier recursion.
        let a = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.0, 0.0, -3.0, 1.0, -0.5, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
        let c = DMatrix::from_row_slice(1, 3, &[1.0, 0.5, -1.0]);
        let r = ResetElement::new(a.clone(), b.clone(), c.clone(), 0.7, 0.3).unwrap();
        let blc = r.blc();
        for k in 0..100 {
            let w = 0.05 * (k as f64 + 1.0) * 1.37;
            let want = {
                let n = 3;
                let mut m = DMatrix::<Complex64>::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] = Complex64::new(-a[(i, j)], 0.0);
                    }
                    m[(i, i)] += Complex64::new(0.0, w);
                }
                let x = m.lu().solve(&b.map(|v| Complex64::new(v, 0.0))).unwrap();
                (c.map(|v| Complex64::new(v, 0.0)) * x)[(0, 0)] + 0.7
            };
            let got = blc.eval(w).unwrap();
            assert!(
                (want - got).norm() <= 1e-9 * want.norm(),
                "mismatch at w = {w}"
            );
        }
    }

    #[test]
    fn clegg_open_loop_stability_is_exactly_gamma_magnitude() {
        let grid = default_delta_grid();
        let s0 = open_loop_reset_stable(&ResetElement::clegg(1.0, 0.0).unwrap(), &grid).unwrap();
        assert!(s0.stable);
        assert_eq!(s0.worst_radius, 0.0);
        let s3 = open_loop_reset_stable(&ResetElement::clegg(1.0, 0.3).unwrap(), &grid).unwrap();
        assert!(s3.stable);
        assert_relative_eq!(s3.worst_radius, 0.3, max_relative = 1e-12);
    }

    #[test]
    fn nonzero_flow_stability_uses_the_grid() {
        // Stable flow, strong contraction at the jump: stable overall.
        let r = ResetElement::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -4.0, -0.4]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            0.0,
            0.1,
        )
        .unwrap();
        let s = open_loop_reset_stable(&r, &default_delta_grid()).unwrap();
        // The flow alone is only lightly damped, so some δ comes close to
        // radius 1 but the report must still carry the maximizer.
        assert!(s.worst_radius > 0.0);
        assert!(s.worst_delta >= 1e-4 && s.worst_delta <= 10.0);
    }

    #[test]
    fn trivial_topology_base_loop_is_blc_plus_one() {
        let one = RationalTransferFunction::one;
        let topo = LoopTopology {
            c1: one(),
            c2: one(),
            c3: one(),
            c4: one(),
            cs: one(),
            plant: one(),
            reset: ResetElement::clegg(1.0, 0.0).unwrap(),
        };
        let l = topo.base_loop().unwrap();
        // (1/s + 1) = (1 + s)/s.
        assert_eq!(l.num().coeffs(), &[1.0, 1.0]);
        assert_eq!(l.den().coeffs(), &[0.0, 1.0]);
        let s = topo.bls_sensitivity().unwrap();
        assert_eq!(s.den().coeffs(), &[1.0, 2.0]);
    }

    #[test]
    fn base_loop_equals_product_of_factor_evaluations() {
        let topo = LoopTopology {
            c1: RationalTransferFunction::new(&[1.0, 0.5], &[2.0, 1.0]).unwrap(),
            c2: RationalTransferFunction::one(),
            c3: RationalTransferFunction::new(&[30.0, 2.0], &[500.0, 1.0]).unwrap(),
            c4: RationalTransferFunction::one(),
            cs: RationalTransferFunction::one(),
            plant: plant(),
            reset: ResetElement::clegg(125.0, 0.2).unwrap(),
        };
        let l = topo.base_loop().unwrap();
        for &w in &[0.3, 3.0, 33.0, 330.0] {
            let want = topo.c1.eval(w).unwrap()
                * (topo.reset.blc().eval(w).unwrap() + topo.c2.eval(w).unwrap())
                * topo.c3.eval(w).unwrap()
                * plant().eval(w).unwrap();
            let got = l.eval(w).unwrap();
            assert!((want - got).norm() <= 1e-9 * want.norm());
        }
    }

    #[test]
    fn sensitivity_rolls_off_to_unity() {
        let topo = LoopTopology {
            c1: RationalTransferFunction::one(),
            c2: RationalTransferFunction::one(),
            c3: RationalTransferFunction::one(),
            c4: RationalTransferFunction::one(),
            cs: RationalTransferFunction::one(),
            plant: plant(),
            reset: ResetElement::clegg(125.0, 0.0).unwrap(),
        };
        let s = topo.bls_sensitivity().unwrap();
        assert_relative_eq!(s.eval(1e6).unwrap().norm(), 1.0, max_relative = 1e-3);
    }

    #[test]
    fn topology_json_round_trips_with_ci_shorthand() {
        let json = r#"{
            "c1": {"num":[1.0],"den":[1.0]},
            "c2": {"num":[0.0],"den":[1.0]},
            "c3": {"num":[30.0,2.0],"den":[500.0,1.0]},
            "c4": {"num":[1.0],"den":[1.0]},
            "cs": {"num":[1.0],"den":[1.0]},
            "plant": {"num":[661500.0],"den":[583700.0,279.4,83.57]},
            "reset": {"ci": {"gamma": 0.25, "gain": 125.0}}
        }"#;
        let topo: LoopTopology = serde_json::from_str(json).unwrap();
        assert_eq!(topo.reset.gamma(), 0.25);
        assert_eq!(topo.reset.c_r()[(0, 0)], 125.0);
        // Canonical serialization uses the full matrix form and parses back.
        let full = serde_json::to_string(&topo).unwrap();
        assert!(full.contains("\"A_R\""));
        let back: LoopTopology = serde_json::from_str(&full).unwrap();
        assert_eq!(back, topo);
    }

    #[test]
    fn shorthand_defaults_to_unit_gain() {
        let r: ResetElement = serde_json::from_str(r#"{"ci":{"gamma":0.5}}"#).unwrap();
        assert_eq!(r.c_r()[(0, 0)], 1.0);
        assert_eq!(r.blc().num().coeffs(), &[1.0]);
    }
}
