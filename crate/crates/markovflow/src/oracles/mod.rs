//! Independent ground-truth engines for the closed forms: the Peano–Baker
//! series, Runge–Kutta integration, the dense matrix exponential and
//! principal logarithm, and the Magnus-residual checker.
//!
//! None of these reuse the structured closed forms they verify; agreement
//! between an oracle and a closed form is evidence for both.

mod logm;
mod ode;
mod pbs;

pub use logm::dense_logm_principal;
pub use ode::{ode_solve, ode_solve_grid, ODEConfig, ODEMethod};
pub use pbs::{pbs_solve, PBSConfig, PbsSolution};

use nalgebra::DMatrix;

use crate::family::GeneratorFamily;
use crate::flows::{self, FlowTolerances};
use crate::kernels::bernoulli::f_series_coefficients_f64;
use crate::{dense, Error, Result};

/// Dense matrix exponential (scaling and squaring with norm-based Padé
/// order selection).
pub fn dense_expm(b: &DMatrix<f64>) -> DMatrix<f64> {
    crate::kernels::expm(b)
}

/// One application of the twisted adjoint is `B ↦ [B, R] = B·R − R·B`;
/// this iterates it `n` times starting from `Q`.
pub fn twisted_adjoint_power(r: &DMatrix<f64>, q: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    if r.shape() != q.shape() || r.nrows() != r.ncols() {
        return Err(Error::DimensionMismatch {
            left: r.nrows(),
            right: q.nrows(),
        });
    }
    let mut acc = q.clone();
    for _ in 0..n {
        acc = &acc * r - r * &acc;
    }
    Ok(acc)
}

/// Result of the Magnus-residual check: the finite-difference residual, the
/// number of ad-series terms summed, and whether the series tail had
/// decayed below noise level by the term cap. A non-converged tail means
/// `t` lies outside the small-`t` region where the truncated series is a
/// valid reference, so the residual proves nothing there.
#[derive(Debug, Clone, Copy)]
pub struct MagnusCheck {
    pub residual: f64,
    pub terms: usize,
    pub tail_converged: bool,
}

/// Finite-difference check of the Magnus ODE `Ṙ = Σₙ (bₙ/n!)·ãdⁿ_R(Q)`.
///
/// Returns the max-abs norm of the difference between the central
/// finite-difference derivative of the closed-form `R` and the ad-series
/// truncated at order `N`. The closed-form evaluations run at a tightened
/// quadrature tolerance so that the division by `2h` does not amplify
/// quadrature noise past the residual target.
pub fn magnus_residual(
    family: &GeneratorFamily,
    t: f64,
    n_terms: usize,
    fd_step: f64,
) -> Result<f64> {
    Ok(magnus_residual_check(family, t, n_terms, fd_step)?.residual)
}

/// Like [`magnus_residual`], additionally reporting series-tail convergence
/// and stopping early once the terms fall below the finite-difference noise
/// floor.
pub fn magnus_residual_check(
    family: &GeneratorFamily,
    t: f64,
    n_terms: usize,
    fd_step: f64,
) -> Result<MagnusCheck> {
    if !(fd_step > 0.0 && t - fd_step > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "need 0 < h < t for the central difference, got t = {t}, h = {fd_step}"
        )));
    }
    let tols = FlowTolerances {
        quadrature: 1e-12,
        series: 1e-13,
    };
    let r_minus = closed_form_log(family, t - fd_step, tols)?;
    let r_center = closed_form_log(family, t, tols)?;
    let r_plus = closed_form_log(family, t + fd_step, tols)?;
    let r_dot = (r_plus - r_minus) / (2.0 * fd_step);

    let q_t = family.eval_dense(t);
    let scale = dense::max_abs(&q_t).max(1.0);
    let tail_floor = 1e-9 * scale;
    let coeffs = f_series_coefficients_f64(n_terms + 1);
    let mut series = q_t.clone() * coeffs[0];
    let mut ad = q_t;
    let mut terms = 0;
    let mut quiet_streak = 0;
    let mut tail_converged = false;
    for &c in coeffs.iter().take(n_terms + 1).skip(1) {
        ad = twisted_adjoint_power(&r_center, &ad, 1)?;
        let term = &ad * c;
        let term_norm = dense::max_abs(&term);
        series += term;
        terms += 1;
        // odd Bernoulli coefficients vanish, so one small term proves nothing
        if term_norm <= tail_floor {
            quiet_streak += 1;
            if quiet_streak >= 2 {
                tail_converged = true;
                break;
            }
        } else {
            quiet_streak = 0;
        }
    }
    Ok(MagnusCheck {
        residual: dense::max_abs(&(r_dot - series)),
        terms,
        tail_converged,
    })
}

/// The closed-form principal logarithm for each family kind.
fn closed_form_log(family: &GeneratorFamily, t: f64, tols: FlowTolerances) -> Result<DMatrix<f64>> {
    match family {
        GeneratorFamily::EqualInput(f) => {
            let result = flows::ei_flow(f, &[0.0, t], tols.quadrature)?;
            result.r[1].clone()
        }
        GeneratorFamily::Perturbed(f) => flows::perturbed_log(f, t, tols),
        GeneratorFamily::Commuting(f) => Ok(flows::commuting_flow_log(f, t, tols)?.r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::max_abs;

    #[test]
    fn adjoint_power_zero_is_identity_map() {
        let r = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let out = twisted_adjoint_power(&r, &q, 0).unwrap();
        assert_eq!(out, q);
    }

    #[test]
    fn adjoint_of_commuting_matrices_vanishes() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let q = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 5.0]);
        let out = twisted_adjoint_power(&r, &q, 1).unwrap();
        assert!(max_abs(&out) < 1e-15);
    }

    #[test]
    fn adjoint_dimension_mismatch() {
        let r = DMatrix::zeros(2, 2);
        let q = DMatrix::zeros(3, 3);
        assert!(twisted_adjoint_power(&r, &q, 1).is_err());
    }

    #[test]
    fn magnus_residual_on_commuting_family_needs_no_ad_terms() {
        // q ≡ 0: Ṙ = Q exactly, so only the n = 0 term survives and the
        // residual is pure finite-difference noise at any truncation order.
        let mut rng = crate::rng::Lcg::new(77);
        let k = rng.rate_matrix(3, 1.0);
        let family = crate::family::GeneratorFamily::commuting(
            vec![(
                crate::timefn::TimeFunction::Polynomial {
                    coeffs: vec![1.0, 0.3],
                },
                k,
            )],
            crate::timefn::VectorTimeFunction::new(vec![
                crate::timefn::TimeFunction::constant(0.0),
                crate::timefn::TimeFunction::constant(0.0),
                crate::timefn::TimeFunction::constant(0.0),
            ])
            .unwrap(),
        );
        for n in [0usize, 4] {
            let residual = magnus_residual(&family, 0.8, n, 1e-5).unwrap();
            assert!(residual <= 1e-6, "N = {n}: residual {residual:e}");
        }
    }
}
