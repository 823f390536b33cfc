//! Matrix functions of `f` and `g` via eigendecomposition with a
//! truncated-Taylor fallback.
//!
//! Zero-row-sum matrices always carry the eigenvalue 0, so the direct solve
//! `f(B) = B·(e^B − I)⁻¹` is unavailable; the eigendecomposition route
//! applies the scalar kernel per eigenvalue, which handles the removable
//! singularity. Defective or badly conditioned spectra fall back to the
//! Taylor series, valid while the spectral radius stays below `0.9·2π`.

use nalgebra::{Complex, DMatrix};
use num_complex::Complex64;

use super::{check_pole_guard, FSeries, TAYLOR_RADIUS};
use crate::{Error, Result};

/// Condition-number gate for the eigenvector basis.
const EIGEN_COND_LIMIT: f64 = 1e6;

/// Relative gate on the imaginary residue of the reconstructed real matrix.
const IMAG_RESIDUE_LIMIT: f64 = 1e-7;

pub(crate) fn matrix_function(
    b: &DMatrix<f64>,
    scalar: impl Fn(Complex64) -> Complex64,
    series: FSeries,
) -> Result<DMatrix<f64>> {
    let d = b.nrows();
    assert_eq!(d, b.ncols(), "matrix kernels require a square matrix");
    let eigs: Vec<Complex64> = crate::dense::eigenvalues(b)?;
    check_pole_guard(&eigs)?;

    if let Some(result) = try_eigen_route(b, &eigs, &scalar) {
        return Ok(result);
    }

    let rho = eigs.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    if rho >= TAYLOR_RADIUS {
        return Err(Error::IllConditionedNoFallback {
            rho,
            limit: TAYLOR_RADIUS,
        });
    }
    taylor_series(b, series, rho)
}

/// Groups numerically coincident eigenvalues, builds an eigenvector basis
/// from per-cluster null spaces, and applies the scalar kernel on the
/// diagonal. Returns `None` when the basis is rank-deficient or worse
/// conditioned than [`EIGEN_COND_LIMIT`].
fn try_eigen_route(
    b: &DMatrix<f64>,
    eigs: &[Complex64],
    scalar: impl Fn(Complex64) -> Complex64,
) -> Option<DMatrix<f64>> {
    let d = b.nrows();
    let scale = eigs.iter().fold(1.0_f64, |a, z| a.max(z.norm()));
    let cluster_tol = 1e-6 * scale;

    // Greedy clustering of the (already computed) eigenvalues.
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for &z in eigs {
        match clusters
            .iter_mut()
            .find(|(c, _)| (*c - z).norm() <= cluster_tol)
        {
            Some((c, count)) => {
                // running mean keeps the representative central
                *c = (*c * (*count as f64) + z) / (*count as f64 + 1.0);
                *count += 1;
            }
            None => clusters.push((z, 1)),
        }
    }

    let bc: DMatrix<Complex64> = b.map(|x| Complex::new(x, 0.0));
    let mut basis: Vec<nalgebra::DVector<Complex64>> = Vec::with_capacity(d);
    let mut diag: Vec<Complex64> = Vec::with_capacity(d);

    for &(lambda, multiplicity) in &clusters {
        let shifted = &bc - DMatrix::<Complex64>::identity(d, d) * lambda;
        let svd = shifted.svd(false, true);
        let sigma_max = svd.singular_values.iter().fold(0.0_f64, |a, &s| a.max(s));
        let null_tol = 1e-8 * sigma_max.max(scale);
        let v_t = svd.v_t.as_ref()?;
        // indices of the `multiplicity` smallest singular values
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| {
            svd.singular_values[i]
                .partial_cmp(&svd.singular_values[j])
                .unwrap()
        });
        for &idx in order.iter().take(multiplicity) {
            // geometric multiplicity short of algebraic: defective, no basis
            if svd.singular_values[idx] > null_tol {
                return None;
            }
            // right singular vector = conjugated row of Vᴴ
            let v = v_t.row(idx).transpose().map(|x| x.conj());
            basis.push(v);
            diag.push(lambda);
        }
    }
    if basis.len() != d {
        return None;
    }

    let v = DMatrix::from_columns(&basis);
    let lu = v.clone().lu();
    let v_inv = lu.solve(&DMatrix::<Complex64>::identity(d, d))?;
    let cond = one_norm_c(&v) * one_norm_c(&v_inv);
    if !cond.is_finite() || cond > EIGEN_COND_LIMIT {
        return None;
    }

    let mut scaled = v.clone();
    for (j, &lambda) in diag.iter().enumerate() {
        let fz = scalar(lambda);
        for i in 0..d {
            scaled[(i, j)] *= fz;
        }
    }
    let result_c = scaled * v_inv;
    let mut imag_worst = 0.0_f64;
    let mut real_worst = 0.0_f64;
    for z in result_c.iter() {
        imag_worst = imag_worst.max(z.im.abs());
        real_worst = real_worst.max(z.re.abs());
    }
    if imag_worst > IMAG_RESIDUE_LIMIT * real_worst.max(1.0) {
        return None;
    }
    Some(result_c.map(|z| z.re))
}

fn one_norm_c(a: &DMatrix<Complex64>) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|z| z.norm()).sum();
        worst = worst.max(s);
    }
    worst
}

/// Truncated Taylor series Σ cₙ Bⁿ with early termination once three
/// consecutive terms fall below the floating-point floor of the running sum
/// (the odd Bernoulli coefficients vanish, so one small term proves nothing).
fn taylor_series(b: &DMatrix<f64>, series: FSeries, rho: f64) -> Result<DMatrix<f64>> {
    let d = b.nrows();
    let max_terms = 600;
    let coeffs = series.coefficients(max_terms);
    let mut acc = DMatrix::<f64>::identity(d, d) * coeffs[0];
    let mut power = DMatrix::<f64>::identity(d, d);
    let mut quiet_streak = 0;
    let mut last_term = f64::INFINITY;
    for &c in coeffs.iter().skip(1) {
        power = &power * b;
        let term = &power * c;
        let term_norm = crate::dense::max_abs(&term);
        acc += term;
        last_term = term_norm;
        let floor = 1e-16 * crate::dense::max_abs(&acc).max(1.0);
        if term_norm <= floor {
            quiet_streak += 1;
            if quiet_streak >= 3 {
                return Ok(acc);
            }
        } else {
            quiet_streak = 0;
        }
    }
    if rho < 0.8 * TAYLOR_RADIUS {
        // geometric tail bound is already far below f64 resolution
        return Ok(acc);
    }
    Err(Error::SeriesNotConverged {
        tol: 1e-16,
        max_terms,
        last: last_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::max_abs;
    use crate::kernels::{f_complex, matrix_kernel_eval, MatrixKernel};

    #[test]
    fn taylor_fallback_handles_defective_matrix() {
        // Jordan block: not diagonalisable, spectral radius 0.5 < 0.9·2π.
        let b = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 0.5]);
        let f = matrix_kernel_eval(MatrixKernel::F, &b).unwrap();
        // f([[a,1],[0,a]]) = [[f(a), f'(a)], [0, f(a)]]
        let fa = crate::kernels::f_scalar(0.5);
        let h = 1e-6;
        let fprime =
            (crate::kernels::f_scalar(0.5 + h) - crate::kernels::f_scalar(0.5 - h)) / (2.0 * h);
        assert!((f[(0, 0)] - fa).abs() < 1e-12);
        assert!((f[(0, 1)] - fprime).abs() < 1e-9);
        assert!(f[(1, 0)].abs() < 1e-14);
    }

    #[test]
    fn defective_beyond_taylor_radius_is_rejected() {
        let rho = 0.95 * std::f64::consts::TAU;
        let b = DMatrix::from_row_slice(2, 2, &[rho, 1.0, 0.0, rho]);
        match matrix_function(&b, f_complex, FSeries::F) {
            Err(Error::IllConditionedNoFallback { .. }) => {}
            other => panic!("expected IllConditionedNoFallback, got {other:?}"),
        }
    }

    #[test]
    fn eigen_route_handles_complex_spectrum() {
        // rotation-like matrix with complex conjugate eigenvalues
        let b = DMatrix::from_row_slice(2, 2, &[0.1, 2.0, -2.0, 0.1]);
        let f = matrix_kernel_eval(MatrixKernel::F, &b).unwrap();
        // check against defining identity f(B)(e^B − I) = B
        let e = crate::kernels::expm(&b);
        let residual = &f * (&e - DMatrix::identity(2, 2)) - &b;
        assert!(max_abs(&residual) < 1e-11);
    }
}
