//! Scalar special functions and their matrix-argument counterparts.
//!
//! The four scalar kernels, each with a removable singularity at 0:
//!
//! * `H`: `h(u) = (1 − e^{−u})/u`, `h(0) = 1` — positive on all of ℝ.
//! * `F`: `f(u) = u/(eᵘ − 1)`, `f(0) = 1` — the Bernoulli generating kernel.
//! * `G`: `g(u) = (f(u) − 1)/u`, `g(0) = −1/2`.
//! * `STAMM_H`: the antiderivative `∫₀ᵘ g = −u − log f(u)`, value 0 at 0.
//!
//! Matrix arguments are supported for `exp` (scaling and squaring), `f` and
//! `g` (eigendecomposition with a truncated-Taylor fallback). `f` and `g` are
//! meromorphic with first-order poles at `2πin`, `n ≠ 0`; matrix evaluation
//! refuses eigenvalues within [`POLE_MARGIN`] of a pole.

pub mod bernoulli;
mod expm;
mod funm;

pub use bernoulli::{bernoulli_numbers, BernoulliTable};
pub use expm::expm;

use num_complex::Complex64;
use std::sync::OnceLock;

use crate::{Error, Result};

/// Required distance between eigenvalues and the nonzero poles `2πin` of `f`
/// and `g`.
pub const POLE_MARGIN: f64 = 0.1;

/// Spectral-radius limit for the truncated-Taylor fallback, `0.9·2π`.
pub const TAYLOR_RADIUS: f64 = 0.9 * std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    H,
    F,
    G,
    StammH,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKernel {
    Exp,
    F,
    G,
}

/// Switch point between the direct formulas and the Taylor series; below
/// this the subtraction in `g` and `STAMM_H` loses digits.
const SERIES_CUTOFF: f64 = 0.5;

fn f_coeffs() -> &'static [f64] {
    static COEFFS: OnceLock<Vec<f64>> = OnceLock::new();
    COEFFS.get_or_init(|| bernoulli::f_series_coefficients_f64(32))
}

/// Evaluates one scalar kernel. Relative accuracy is ≤ 1e−14 on
/// `u ∈ [−50, 50]`, including the removable singularity at 0.
pub fn kernel_eval(kind: KernelKind, u: f64) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::NonFiniteInput(format!("kernel argument {u}")));
    }
    Ok(match kind {
        KernelKind::H => h_scalar(u),
        KernelKind::F => f_scalar(u),
        KernelKind::G => g_scalar(u),
        KernelKind::StammH => stamm_h_scalar(u),
    })
}

/// `h(u) = (1 − e^{−u})/u`, continuously extended by `h(0) = 1`.
pub fn h_scalar(u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else {
        -f64::exp_m1(-u) / u
    }
}

/// `f(u) = u/(eᵘ − 1)`, continuously extended by `f(0) = 1`.
pub fn f_scalar(u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else {
        u / f64::exp_m1(u)
    }
}

/// `g(u) = (f(u) − 1)/u`, continuously extended by `g(0) = −1/2`.
pub fn g_scalar(u: f64) -> f64 {
    if u.abs() < SERIES_CUTOFF {
        let c = f_coeffs();
        // Σ_{n≥1} cₙ u^{n−1}, Horner from the top
        let mut acc = 0.0;
        for &cn in c.iter().skip(1).rev() {
            acc = acc * u + cn;
        }
        acc
    } else {
        (f_scalar(u) - 1.0) / u
    }
}

/// `∫₀ᵘ g(v) dv = −u − log f(u) = −u + log((eᵘ − 1)/u)`, value 0 at 0.
pub fn stamm_h_scalar(u: f64) -> f64 {
    if u.abs() < SERIES_CUTOFF {
        let c = f_coeffs();
        // Σ_{n≥1} cₙ uⁿ/n
        let mut acc = 0.0;
        for (n, &cn) in c.iter().enumerate().skip(1).rev() {
            acc = acc * u + cn / n as f64;
        }
        acc * u
    } else {
        -u + (f64::exp_m1(u) / u).ln()
    }
}

/// Complex `f(z) = z/(eᶻ − 1)`; series near 0, direct elsewhere. Assumes the
/// caller has kept `z` away from the nonzero poles.
pub fn f_complex(z: Complex64) -> Complex64 {
    if z.norm() < 0.25 {
        let c = f_coeffs();
        let mut acc = Complex64::new(0.0, 0.0);
        for &cn in c.iter().rev() {
            acc = acc * z + cn;
        }
        acc
    } else {
        z / (z.exp() - 1.0)
    }
}

/// Complex `g(z) = (f(z) − 1)/z`.
pub fn g_complex(z: Complex64) -> Complex64 {
    if z.norm() < 0.25 {
        let c = f_coeffs();
        let mut acc = Complex64::new(0.0, 0.0);
        for &cn in c.iter().skip(1).rev() {
            acc = acc * z + cn;
        }
        acc
    } else {
        (f_complex(z) - 1.0) / z
    }
}

/// Matrix-argument evaluation of `exp`, `f` or `g`.
///
/// `exp` uses scaling and squaring with norm-based Padé order selection and
/// is unconditional. `f` and `g` go through an eigendecomposition when the
/// eigenvector basis is well conditioned (condition number ≤ 1e6) and fall
/// back to a truncated Taylor series otherwise, which requires the spectral
/// radius to stay below [`TAYLOR_RADIUS`].
pub fn matrix_kernel_eval(
    kind: MatrixKernel,
    b: &nalgebra::DMatrix<f64>,
) -> Result<nalgebra::DMatrix<f64>> {
    match kind {
        MatrixKernel::Exp => Ok(expm::expm(b)),
        MatrixKernel::F => funm::matrix_function(b, f_complex, FSeries::F),
        MatrixKernel::G => funm::matrix_function(b, g_complex, FSeries::G),
    }
}

/// Which Taylor series the fallback uses.
#[derive(Debug, Clone, Copy)]
pub(crate) enum FSeries {
    F,
    G,
}

impl FSeries {
    /// Taylor coefficients c₀, c₁, … of the kernel around 0.
    pub(crate) fn coefficients(self, count: usize) -> Vec<f64> {
        let f = bernoulli::f_series_coefficients_f64(count + 1);
        match self {
            FSeries::F => f[..count].to_vec(),
            FSeries::G => f[1..count + 1].to_vec(),
        }
    }
}

/// Rejects eigenvalues within [`POLE_MARGIN`] of a nonzero pole `2πin`.
pub(crate) fn check_pole_guard(eigs: &[Complex64]) -> Result<()> {
    for &z in eigs {
        let ratio = z.im / std::f64::consts::TAU;
        let mut candidates = vec![ratio.floor() as i64, ratio.ceil() as i64, 1, -1];
        candidates.retain(|&n| n != 0);
        for n in candidates {
            let pole = Complex64::new(0.0, std::f64::consts::TAU * n as f64);
            if (z - pole).norm() < POLE_MARGIN {
                return Err(Error::PoleProximity {
                    value: format!("{z}"),
                    pole_index: n,
                    margin: POLE_MARGIN,
                });
            }
        }
    }
    Ok(())
}
