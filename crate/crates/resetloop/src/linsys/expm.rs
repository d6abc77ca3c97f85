//! Dense matrix exponential via Padé-13 scaling and squaring.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Padé-13 numerator coefficients for the exponential (ascending from the
/// constant term b0 at index 0 to b13).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Backward-error radius of the degree-13 diagonal Padé approximant: the
/// approximant is accurate to double-precision roundoff whenever the
/// power-norm bound η falls below this value.
const THETA13: f64 = 5.371920351148152;

/// `binom(54, 27) · 55!` — reciprocal of the leading coefficient of the
/// degree-13 Padé remainder, used by the cancellation guard.
const ELL13_C_RECIP: f64 = 2.4719128253168207e88;

/// Maximum absolute column sum.
fn norm1(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max)
}

/// `‖ |A|^p ‖₁` for the entrywise absolute value of `A`, computed by the
/// nonnegative vector recurrence (never forms the power explicitly).
fn abs_power_norm1(a: &DMatrix<f64>, p: usize) -> f64 {
    let n = a.nrows();
    // ‖M‖₁ = max_j (1ᵀ M)_j, so iterate v ← |A|ᵀ v starting from ones.
    let mut v = vec![1.0_f64; n];
    for _ in 0..p {
        let mut next = vec![0.0_f64; n];
        for (j, slot) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..n {
                acc += a[(i, j)].abs() * v[i];
            }
            *slot = acc;
        }
        v = next;
    }
    v.into_iter().fold(0.0_f64, f64::max)
}

/// Extra squarings demanded by the Al-Mohy–Higham cancellation guard: the
/// power-norm bound η can understate the Padé truncation error when `A` has
/// strong sign cancellation (large `‖|A|^{27}‖` relative to `‖A‖`); this
/// recovers the difference.
fn ell13(a: &DMatrix<f64>) -> i32 {
    let base = norm1(a);
    if base == 0.0 {
        return 0;
    }
    let p27 = abs_power_norm1(a, 27);
    if p27 == 0.0 {
        return 0;
    }
    let alpha = p27 / (base * ELL13_C_RECIP);
    if !alpha.is_finite() {
        return 0;
    }
    let u = (2.0_f64).powi(-53);
    let value = ((alpha / u).log2() / 26.0).ceil();
    if value.is_finite() && value > 0.0 {
        value as i32
    } else {
        0
    }
}

/// Computes `e^A` for a square real matrix by scaling-and-squaring with the
/// degree-13 diagonal Padé approximant.
///
/// The number of squarings comes from norms of matrix *powers*
/// (`η = min(max(d₆,d₈), max(d₈,d₁₀))` with `d_k = ‖A^k‖₁^{1/k}`), not from
/// `‖A‖₁` itself. For highly non-normal matrices — companion forms with
/// widely spread coefficients are the motivating case here — `‖A‖₁` can
/// overstate the growth of the power series by many orders of magnitude,
/// and scaling by it drives the squaring phase into catastrophic rounding.
/// The power-norm bound tracks the actual series behaviour, with a
/// cancellation guard topping up the count when entrywise cancellation
/// hides growth.
///
/// # Errors
/// [`Error::NonFinite`] if the input contains non-finite entries or the
/// result overflows.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "matrix exponential input",
        });
    }

    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let d6 = norm1(&a6).powf(1.0 / 6.0);
    let d8 = norm1(&(&a4 * &a4)).powf(1.0 / 8.0);
    let d10 = norm1(&(&a4 * &a6)).powf(1.0 / 10.0);
    let eta = f64::min(d6.max(d8), d8.max(d10));

    let mut squarings = if eta > THETA13 {
        (eta / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    squarings += ell13(&(a * (0.5_f64).powi(squarings)));

    let scaled = a * (0.5_f64).powi(squarings);
    let s2 = &a2 * (0.5_f64).powi(2 * squarings);
    let s4 = &a4 * (0.5_f64).powi(4 * squarings);
    let s6 = &a6 * (0.5_f64).powi(6 * squarings);

    let ident = DMatrix::<f64>::identity(n, n);
    let u_inner = &s6 * (PADE13[13] * &s6 + PADE13[11] * &s4 + PADE13[9] * &s2)
        + PADE13[7] * &s6
        + PADE13[5] * &s4
        + PADE13[3] * &s2
        + PADE13[1] * &ident;
    let u = &scaled * u_inner;
    let v = &s6 * (PADE13[12] * &s6 + PADE13[10] * &s4 + PADE13[8] * &s2)
        + PADE13[6] * &s6
        + PADE13[4] * &s4
        + PADE13[2] * &s2
        + PADE13[0] * &ident;

    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut x = lhs.lu().solve(&rhs).ok_or(Error::NonFinite {
        context: "matrix exponential Padé solve",
    })?;

    for _ in 0..squarings {
        x = &x * &x;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "matrix exponential result",
        });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_of_zero_is_identity() {
        let e = expm(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(e, DMatrix::identity(3, 3));
    }

    #[test]
    fn diagonal_case_exponentiates_entrywise() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.5, 0.25]));
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - (-1.5_f64).exp()).abs() < 1e-13);
        assert!((e[(1, 1)] - (0.25_f64).exp()).abs() < 1e-13);
        assert!(e[(0, 1)].abs() < 1e-15 && e[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn nilpotent_series_terminates_exactly() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = expm(&a).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!((e - want).norm() < 1e-15);
    }

    #[test]
    fn rotation_generator_gives_sine_and_cosine() {
        // exp([[0, -w],[w, 0]] t) is a rotation by w t.
        let w = 3.0;
        let t = 0.7;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -w * t, w * t, 0.0]);
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - (w * t).cos()).abs() < 1e-13);
        assert!((e[(1, 0)] - (w * t).sin()).abs() < 1e-13);
    }

    #[test]
    fn large_norm_still_accurate_via_scaling() {
        // exp(diag(12, -700)) stresses the squaring phase.
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![12.0, -700.0]));
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - 12.0_f64.exp()).abs() / 12.0_f64.exp() < 1e-12);
        assert!(e[(1, 1)].abs() < 1e-200);
    }

    #[test]
    fn companion_form_with_huge_entries_stays_accurate() {
        // Controllable-canonical realization of 1/((s/w1+1)(s/w2+1)) with
        // corners three decades apart: the leading denominator coefficient
        // is 1/(w1·w2), so the companion entries reach w1·w2 = 2.5e7 while
        // the eigenvalues stay at −w1, −w2. A 1-norm-based squaring count
        // destroys this case; the power-norm count keeps it exact.
        let (w1, w2) = (25.0, 2.5e4);
        let dt = 1.0e-2;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -w1 * w2 * dt * dt, -(w1 + w2) * dt]);
        let e = expm(&a).unwrap();
        // Closed form via eigen-decomposition of the companion matrix.
        let (l1, l2) = (-w1 * dt, -w2 * dt);
        let (e1, e2) = (l1.exp(), l2.exp());
        let want00 = (l1 * e2 - l2 * e1) / (l1 - l2);
        let want01 = (e1 - e2) / (l1 - l2);
        assert!((e[(0, 0)] - want00).abs() <= 1e-12 * want00.abs());
        assert!((e[(0, 1)] - want01).abs() <= 1e-12 * want01.abs());
    }

    #[test]
    fn rejects_non_finite_input() {
        let a = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(expm(&a), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn empty_matrix_round_trips() {
        let e = expm(&DMatrix::zeros(0, 0)).unwrap();
        assert_eq!(e.nrows(), 0);
    }
}
