//! Real polynomials in one variable with ascending coefficients.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A real polynomial `a0 + a1 s + a2 s² + …`, stored with ascending powers.
///
/// Construction trims exact trailing zeros so that the leading coefficient
/// of a nonzero polynomial is nonzero and `degree` equals
/// `coefficients.len() - 1`. The zero polynomial is represented as the
/// single coefficient `[0.0]`.
///
/// Trimming tests coefficients against exact zero, not a tolerance:
/// structural zeros written by constructors and preserved by ring
/// operations (`0·x + 0·y`) stay exact in IEEE arithmetic, while tiny
/// nonzero coefficients produced by cancellation are genuine data that a
/// tolerance would silently discard.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial from ascending coefficients, trimming trailing
    /// zeros. An empty slice yields the zero polynomial.
    pub fn new(coeffs: &[f64]) -> Self {
        let mut c = coeffs.to_vec();
        while c.len() > 1 && c[c.len() - 1] == 0.0 {
            c.pop();
        }
        if c.is_empty() {
            c.push(0.0);
        }
        Polynomial { coeffs: c }
    }

    /// The zero polynomial.
    pub fn zero() -> Self {
        Polynomial { coeffs: vec![0.0] }
    }

    /// The constant polynomial `k`.
    pub fn constant(k: f64) -> Self {
        Polynomial { coeffs: vec![k] }
    }

    /// Ascending coefficients, trimmed.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree after trimming (the zero polynomial has degree 0).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// True iff this is the zero polynomial.
    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    /// Evaluates the polynomial at `s = jω` by Horner's rule.
    pub fn eval_jw(&self, omega: f64) -> Complex64 {
        let s = Complex64::new(0.0, omega);
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    /// Magnitude scale of the polynomial at `|s| = ω`: `Σ |a_k| ω^k`.
    ///
    /// This bounds `|p(jω)|` from above and serves as the reference for
    /// relative pole-proximity tests.
    pub fn scale_at(&self, omega: f64) -> f64 {
        let mut pow = 1.0;
        let mut acc = 0.0;
        for &c in &self.coeffs {
            acc += c.abs() * pow;
            pow *= omega;
        }
        acc
    }

    /// Polynomial sum.
    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut c = vec![0.0; n];
        for (i, &a) in self.coeffs.iter().enumerate() {
            c[i] += a;
        }
        for (i, &b) in other.coeffs.iter().enumerate() {
            c[i] += b;
        }
        Polynomial::new(&c)
    }

    /// Polynomial product.
    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.is_zero() || other.is_zero() {
            return Polynomial::zero();
        }
        let mut c = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Polynomial::new(&c)
    }

    /// Product with a scalar.
    pub fn scale(&self, k: f64) -> Polynomial {
        Polynomial::new(&self.coeffs.iter().map(|&c| c * k).collect::<Vec<_>>())
    }

    /// Number of leading (low-order) exact-zero coefficients, i.e. the
    /// multiplicity of the root at `s = 0` as far as stored coefficients
    /// show. The zero polynomial reports 0.
    pub fn low_order_zeros(&self) -> usize {
        if self.is_zero() {
            return 0;
        }
        self.coeffs.iter().take_while(|&&c| c == 0.0).count()
    }

    /// Divides by `s^k`, i.e. drops the `k` lowest coefficients.
    ///
    /// # Panics
    /// Panics if fewer than `k` leading zeros are present; callers must
    /// check [`Polynomial::low_order_zeros`] first.
    pub fn shift_down(&self, k: usize) -> Polynomial {
        assert!(
            self.low_order_zeros() >= k,
            "cannot divide by s^{k}: lowest coefficients are not zero"
        );
        Polynomial::new(&self.coeffs[k..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_trailing_zeros_and_reports_degree() {
        let p = Polynomial::new(&[1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.coeffs(), &[1.0, 2.0]);
        assert_eq!(p.degree(), 1);
    }

    #[test]
    fn zero_polynomial_is_canonical() {
        assert!(Polynomial::new(&[]).is_zero());
        assert!(Polynomial::new(&[0.0, 0.0]).is_zero());
        assert_eq!(Polynomial::zero().degree(), 0);
    }

    #[test]
    fn horner_evaluation_matches_direct() {
        // 1 + 2s + 3s² at s = j2: 1 + 4j + 3·(−4) = −11 + 4j.
        let p = Polynomial::new(&[1.0, 2.0, 3.0]);
        let v = p.eval_jw(2.0);
        assert!((v - Complex64::new(-11.0, 4.0)).norm() < 1e-14);
    }

    #[test]
    fn product_and_sum_agree_with_hand_expansion() {
        let a = Polynomial::new(&[1.0, 1.0]); // 1 + s
        let b = Polynomial::new(&[2.0, 0.0, 1.0]); // 2 + s²
        assert_eq!(a.mul(&b).coeffs(), &[2.0, 2.0, 1.0, 1.0]);
        assert_eq!(a.add(&b).coeffs(), &[3.0, 1.0, 1.0]);
    }

    #[test]
    fn low_order_zero_bookkeeping() {
        let p = Polynomial::new(&[0.0, 0.0, 5.0]); // 5s²
        assert_eq!(p.low_order_zeros(), 2);
        assert_eq!(p.shift_down(1).coeffs(), &[0.0, 5.0]);
        assert_eq!(p.shift_down(2).coeffs(), &[5.0]);
    }
}
