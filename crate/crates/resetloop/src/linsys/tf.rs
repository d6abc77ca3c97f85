//! SISO rational transfer functions and their algebra.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::Polynomial;
use crate::error::{Error, Result};

/// Maximum degree a composed transfer function may reach before composition
/// reports [`Error::DegreeOverflow`]. Catching runaway composition loudly is
/// preferable to silently degrading coefficient precision.
pub const DEGREE_CAP: usize = 64;

/// A rational transfer function `num(s)/den(s)` with real coefficients.
///
/// Both proper and improper functions are representable; properness is
/// queryable via [`RationalTransferFunction::is_proper`]. The denominator is
/// never the zero polynomial.
///
/// Serializes as `{"num": [c0, c1, ...], "den": [d0, d1, ...]}` with
/// ascending powers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TfRepr", into = "TfRepr")]
pub struct RationalTransferFunction {
    num: Polynomial,
    den: Polynomial,
}

#[derive(Serialize, Deserialize)]
struct TfRepr {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TryFrom<TfRepr> for RationalTransferFunction {
    type Error = Error;
    fn try_from(r: TfRepr) -> Result<Self> {
        RationalTransferFunction::new(&r.num, &r.den)
    }
}

impl From<RationalTransferFunction> for TfRepr {
    fn from(tf: RationalTransferFunction) -> TfRepr {
        TfRepr {
            num: tf.num.coeffs().to_vec(),
            den: tf.den.coeffs().to_vec(),
        }
    }
}

/// Outcome of the coefficient-inspection limit of a rational function at
/// `s → 0`, used by the limit-cycle existence tests.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LimitAtZero {
    /// The limit exists; no common `s^k` factor had to be cancelled.
    Finite(f64),
    /// Numerator and denominator shared a factor `s^k`; after cancelling it
    /// the limit is the enclosed finite value.
    ZeroOverZeroResolved(f64),
    /// The denominator vanishes at 0 to higher order than the numerator;
    /// the function diverges as `s → 0`.
    Infinite,
}

impl LimitAtZero {
    /// The limit value, if the function does not diverge.
    pub fn value(&self) -> Option<f64> {
        match self {
            LimitAtZero::Finite(v) | LimitAtZero::ZeroOverZeroResolved(v) => Some(*v),
            LimitAtZero::Infinite => None,
        }
    }
}

impl RationalTransferFunction {
    /// Builds a transfer function from ascending numerator and denominator
    /// coefficients.
    ///
    /// # Errors
    /// [`Error::InvalidDescription`] if the denominator is the zero
    /// polynomial.
    pub fn new(num: &[f64], den: &[f64]) -> Result<Self> {
        let num = Polynomial::new(num);
        let den = Polynomial::new(den);
        if den.is_zero() {
            return Err(Error::InvalidDescription(
                "transfer-function denominator is the zero polynomial".into(),
            ));
        }
        Ok(RationalTransferFunction { num, den })
    }

    /// The constant transfer function `k`.
    pub fn constant(k: f64) -> Self {
        RationalTransferFunction {
            num: Polynomial::constant(k),
            den: Polynomial::constant(1.0),
        }
    }

    /// Unit gain.
    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// The integrator `k/s`.
    pub fn integrator(k: f64) -> Self {
        RationalTransferFunction {
            num: Polynomial::constant(k),
            den: Polynomial::new(&[0.0, 1.0]),
        }
    }

    /// Numerator polynomial.
    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    /// Denominator polynomial.
    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    /// True iff `deg num ≤ deg den` (the zero numerator counts as proper).
    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    /// Evaluates the response at `s = jω`.
    ///
    /// # Errors
    /// [`Error::PoleOnAxis`] when `|den(jω)|` falls below `1e−12` relative
    /// to the denominator's magnitude scale at `ω` (a pole on or numerically
    /// on the imaginary axis).
    pub fn eval(&self, omega: f64) -> Result<Complex64> {
        let d = self.den.eval_jw(omega);
        let scale = self.den.scale_at(omega);
        if d.norm() <= 1e-12 * scale || d.norm() == 0.0 {
            return Err(Error::PoleOnAxis { omega });
        }
        Ok(self.num.eval_jw(omega) / d)
    }

    fn check_cap(degree: usize) -> Result<()> {
        if degree > DEGREE_CAP {
            return Err(Error::DegreeOverflow {
                degree,
                cap: DEGREE_CAP,
            });
        }
        Ok(())
    }

    /// Strips exact common factors of `s` from a composition result.
    ///
    /// Parallel integrator branches (and integrator–derivative cascades)
    /// cross-multiply into forms like `s(s + c)/s²`. The shared constant-term
    /// zeros are exact — sums and products of literal `0.0` coefficients — so
    /// this is pure bookkeeping, but without it a removable origin pair
    /// masquerades as an unstable closed-loop pole. Near-zero coefficients
    /// from roundoff are never stripped; the comparison is exact.
    fn cancel_origin_pairs(num: Polynomial, den: Polynomial) -> (Polynomial, Polynomial) {
        if num.is_zero() || den.is_zero() {
            return (num, den);
        }
        let exact_origin_zeros =
            |p: &Polynomial| p.coeffs().iter().take_while(|c| **c == 0.0).count();
        let k = exact_origin_zeros(&num).min(exact_origin_zeros(&den));
        if k == 0 {
            return (num, den);
        }
        (
            Polynomial::new(&num.coeffs()[k..]),
            Polynomial::new(&den.coeffs()[k..]),
        )
    }

    /// Series (cascade) composition `self · other`.
    ///
    /// # Errors
    /// [`Error::DegreeOverflow`] if a resulting polynomial would exceed
    /// [`DEGREE_CAP`].
    pub fn series(&self, other: &Self) -> Result<Self> {
        Self::check_cap(
            (self.num.degree() + other.num.degree()).max(self.den.degree() + other.den.degree()),
        )?;
        let (num, den) =
            Self::cancel_origin_pairs(self.num.mul(&other.num), self.den.mul(&other.den));
        Ok(RationalTransferFunction { num, den })
    }

    /// Parallel composition `self + other` over the common denominator.
    ///
    /// # Errors
    /// [`Error::DegreeOverflow`] if a resulting polynomial would exceed
    /// [`DEGREE_CAP`].
    pub fn parallel(&self, other: &Self) -> Result<Self> {
        Self::check_cap(
            (self.num.degree() + other.den.degree())
                .max(other.num.degree() + self.den.degree())
                .max(self.den.degree() + other.den.degree()),
        )?;
        let num = self
            .num
            .mul(&other.den)
            .add(&other.num.mul(&self.den));
        let (num, den) = Self::cancel_origin_pairs(num, self.den.mul(&other.den));
        Ok(RationalTransferFunction { num, den })
    }

    /// Unity-feedback closure `L / (1 + L)` of an open loop `L`.
    ///
    /// # Errors
    /// [`Error::DegreeOverflow`] as for the other compositions, and
    /// [`Error::InvalidDescription`] if `1 + L` collapses to zero
    /// identically.
    pub fn feedback_unity(&self) -> Result<Self> {
        Self::check_cap(self.num.degree().max(self.den.degree()))?;
        let den = self.den.add(&self.num);
        if den.is_zero() {
            return Err(Error::InvalidDescription(
                "unity feedback of L = -1: closed loop undefined".into(),
            ));
        }
        let (num, den) = Self::cancel_origin_pairs(self.num.clone(), den);
        Ok(RationalTransferFunction { num, den })
    }

    /// Sensitivity `1 / (1 + L)` of an open loop `L`.
    ///
    /// # Errors
    /// As for [`RationalTransferFunction::feedback_unity`].
    pub fn sensitivity(&self) -> Result<Self> {
        Self::check_cap(self.num.degree().max(self.den.degree()))?;
        let closed = self.den.add(&self.num);
        if closed.is_zero() {
            return Err(Error::InvalidDescription(
                "unity feedback of L = -1: closed loop undefined".into(),
            ));
        }
        let (num, den) = Self::cancel_origin_pairs(self.den.clone(), closed);
        Ok(RationalTransferFunction { num, den })
    }

    /// True iff every pole has strictly negative real part.
    ///
    /// Poles are the eigenvalues of the companion matrix of the monic
    /// denominator; a degree-zero denominator (no poles) is vacuously
    /// Hurwitz. Note that integrating blocks (a pole at the origin) are
    /// *not* Hurwitz under this definition.
    pub fn is_hurwitz(&self) -> bool {
        let den = &self.den;
        let n = den.degree();
        if n == 0 {
            return true;
        }
        let lead = den.coeffs()[n];
        let mut companion = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n - 1 {
            companion[(i + 1, i)] = 1.0;
        }
        for i in 0..n {
            companion[(i, n - 1)] = -den.coeffs()[i] / lead;
        }
        companion
            .complex_eigenvalues()
            .iter()
            .all(|ev| ev.re < 0.0)
    }

    /// Coefficient-inspection limit at `s → 0`.
    ///
    /// Cancels any common `s^k` factor shared by numerator and denominator,
    /// then reads the limit off the constant coefficients: finite ratio,
    /// zero (numerator vanishes to higher order), or divergence (denominator
    /// vanishes to higher order).
    pub fn limit_at_zero(&self) -> LimitAtZero {
        let k = self.num.low_order_zeros().min(self.den.low_order_zeros());
        let (num, den, cancelled) = if k > 0 {
            (self.num.shift_down(k), self.den.shift_down(k), true)
        } else {
            (self.num.clone(), self.den.clone(), false)
        };
        let n0 = num.coeffs()[0];
        let d0 = den.coeffs()[0];
        if d0 == 0.0 {
            // After cancellation at most one side still vanishes at 0.
            if n0 == 0.0 || num.is_zero() {
                // Zero numerator over a vanishing denominator: 0/s^m → 0.
                return LimitAtZero::Finite(0.0);
            }
            return LimitAtZero::Infinite;
        }
        let v = n0 / d0;
        if cancelled {
            LimitAtZero::ZeroOverZeroResolved(v)
        } else {
            LimitAtZero::Finite(v)
        }
    }
}
