//! Principal matrix logarithm through the integral representation
//! `log M = ∫₀¹ (M − I)·(τ(M − I) + I)⁻¹ dτ`, evaluated by adaptive
//! quadrature with one LU solve per integrand evaluation.
//!
//! Valid whenever no eigenvalue of `M` lies on the closed negative real
//! axis; the result is the unique logarithm with spectrum in the strip
//! `|Im| < π`.

use nalgebra::DMatrix;

use crate::quad::try_adaptive_simpson;
use crate::{dense, Error, Result};

/// Relative tolerance of the quadrature against `max(1, ‖M − I‖)`.
const QUAD_TOL: f64 = 1e-12;

/// Recursion cap; each level halves the panel, so 60 levels resolve
/// boundary layers down to widths of 2⁻⁶⁰.
const MAX_DEPTH: u32 = 60;

pub fn dense_logm_principal(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    if d != m.ncols() {
        return Err(Error::DimensionMismatch {
            left: m.nrows(),
            right: m.ncols(),
        });
    }
    let eigs = crate::dense::eigenvalues(m)?;
    let scale = eigs.iter().fold(1.0_f64, |a, z| a.max(z.norm()));
    for z in eigs.iter() {
        if z.re <= 0.0 && z.im.abs() <= 1e-12 * scale {
            return Err(Error::NonpositiveSpectrum {
                value: format!("{z}"),
            });
        }
    }

    let a = m - DMatrix::<f64>::identity(d, d);
    let a_norm = dense::max_abs(&a);
    if a_norm == 0.0 {
        return Ok(DMatrix::zeros(d, d));
    }
    let eye = DMatrix::<f64>::identity(d, d);
    let integrand = |tau: f64| -> Result<DMatrix<f64>> {
        let shifted = &a * tau + &eye;
        let inv = shifted
            .lu()
            .solve(&eye)
            .ok_or_else(|| Error::NonpositiveSpectrum {
                value: format!("τ(M−I)+I singular at τ = {tau}"),
            })?;
        Ok(&a * inv)
    };
    try_adaptive_simpson(integrand, 0.0, 1.0, QUAD_TOL * a_norm.max(1.0), MAX_DEPTH)
}
