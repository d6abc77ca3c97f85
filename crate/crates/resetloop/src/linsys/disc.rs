//! Bilinear (Tustin) discretization.

use nalgebra::DMatrix;

use super::ss::{StateSpaceModel, Timing};
use crate::error::{Error, Result};

/// Discretizes a continuous-time model at sample rate `f_s` (Hz) with the
/// bilinear transform.
///
/// With `T = 1/f_s` and `M = I − A T/2`:
///
/// ```text
/// A_d = M⁻¹ (I + A T/2)      B_d = M⁻¹ B T
/// C_d = C M⁻¹                D_d = D + C_d B T/2
/// ```
///
/// The map preserves DC gain exactly (up to roundoff) whenever `A` is
/// invertible, and warps frequencies only near the Nyquist rate.
///
/// # Errors
/// [`Error::SingularTustin`] if `M` is singular, i.e. `A` has an eigenvalue
/// at `2 f_s`.
pub fn tustin(ss: &StateSpaceModel, f_s: f64) -> Result<StateSpaceModel> {
    assert!(
        matches!(ss.timing(), Timing::Continuous),
        "tustin requires a continuous-time model"
    );
    assert!(f_s > 0.0, "sample rate must be positive");
    let t = 1.0 / f_s;
    let n = ss.order();
    if n == 0 {
        return StateSpaceModel::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, ss.inputs()),
            DMatrix::zeros(ss.outputs(), 0),
            ss.d().clone(),
            Timing::Discrete { step: t },
        );
    }
    let ident = DMatrix::<f64>::identity(n, n);
    let m = &ident - ss.a() * (t / 2.0);
    let lu = m.clone().lu();
    let a_d = lu
        .solve(&(&ident + ss.a() * (t / 2.0)))
        .ok_or(Error::SingularTustin { step: t })?;
    let b_d = lu
        .solve(&(ss.b() * t))
        .ok_or(Error::SingularTustin { step: t })?;
    // C_d = C M⁻¹, computed by solving against the transpose.
    let c_d = m
        .transpose()
        .lu()
        .solve(&ss.c().transpose())
        .ok_or(Error::SingularTustin { step: t })?
        .transpose();
    let d_d = ss.d() + &c_d * ss.b() * (t / 2.0);
    StateSpaceModel::new(a_d, b_d, c_d, d_d, Timing::Discrete { step: t })
}
