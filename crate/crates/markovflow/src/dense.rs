//! Helpers on dense square matrices.
//!
//! Dense matrices are `nalgebra::DMatrix<f64>` throughout the crate. All
//! text/byte level interchange (matrix files, CSV, JSON, the C ABI) is
//! row-major; these helpers centralise the conversions and the norm and
//! structure checks used by flows, oracles and tests.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// Complex eigenvalues of a real square matrix.
///
/// Runs the real Schur decomposition with a bounded iteration count and a
/// deflation threshold slightly above machine epsilon; the library default
/// (unbounded, machine-eps threshold) can spin forever on exactly degenerate
/// spectra, which equal-input matrices produce routinely. If the iteration
/// still stalls, the matrix is retried under seeded orthogonal similarities,
/// which preserve the spectrum exactly but break the stalling structure.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch {
            left: n,
            right: m.ncols(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let max_iter = 100 * n.max(10);
    for attempt in 0..4u64 {
        let candidate = if attempt == 0 {
            m.clone()
        } else {
            let mut rng = crate::rng::Lcg::new(0xE16E_0000 + attempt);
            let v = DVector::from_fn(n, |_, _| rng.uniform(-1.0, 1.0));
            let v = &v / v.norm();
            let reflector = DMatrix::identity(n, n) - &v * v.transpose() * 2.0;
            &reflector * m * &reflector
        };
        if let Some(schur) = nalgebra::linalg::Schur::try_new(candidate, 1e-14, max_iter) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(Error::EigenvaluesNotConverged)
}

/// Builds a matrix from row-major entries.
pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<DMatrix<f64>> {
    if entries.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            left: dim * dim,
            right: entries.len(),
        });
    }
    Ok(DMatrix::from_row_slice(dim, dim, entries))
}

/// Row-major copy of the entries.
pub fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()))
}

/// Largest absolute difference between two matrices of equal shape.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (&x, &y)| acc.max((x - y).abs()))
}

/// Maximum absolute row sum deviation from `target`.
pub fn row_sum_residual(m: &DMatrix<f64>, target: f64) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        let s: f64 = m.row(i).iter().sum();
        worst = worst.max((s - target).abs());
    }
    worst
}

/// Checks a claimed zero-row-sum matrix to the given tolerance.
pub fn check_zero_row_sums(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    let res = row_sum_residual(m, 0.0);
    if res > tol {
        return Err(Error::InvalidFamily(format!(
            "matrix has row-sum residual {res:e} > {tol:e}; not in the zero-row-sum algebra"
        )));
    }
    Ok(())
}

/// Residual of membership in the trace-zero equal-rows ideal: the maximum of
/// row-variation, |trace| and row-sum residual. Zero for exact members.
pub fn equal_rows_traceless_residual(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..d {
        for i in 1..d {
            worst = worst.max((m[(i, j)] - m[(0, j)]).abs());
        }
    }
    worst = worst.max(m.trace().abs());
    worst.max(row_sum_residual(m, 0.0))
}

/// Residual of equal-input form `(λ − x)·I + C_x` with unit row sums, i.e. a
/// matrix whose off-diagonal entries are constant along each column and whose
/// rows sum to one.
pub fn equal_input_markov_residual(m: &DMatrix<f64>) -> f64 {
    match super::algebra::EqualInputMatrix::fit_dense(m) {
        Ok((_, res)) => res,
        Err(_) => f64::INFINITY,
    }
}

/// Row vector times matrix, as a plain `Vec`.
pub fn row_times_matrix(v: &[f64], m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    debug_assert_eq!(v.len(), d);
    let mut out = vec![0.0; m.ncols()];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, &vi) in v.iter().enumerate() {
            acc += vi * m[(i, j)];
        }
        *o = acc;
    }
    out
}

/// Equal-rows matrix with every row equal to `row`.
pub fn equal_rows_from(row: &[f64]) -> DMatrix<f64> {
    let d = row.len();
    DMatrix::from_fn(d, d, |_, j| row[j])
}

/// Commutator `[a, b] = a·b − b·a`.
pub fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_round_trip() {
        let m = from_row_major(2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m[(0, 1)], 2.0);
        assert_eq!(m[(1, 0)], 3.0);
        assert_eq!(to_row_major(&m), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn row_major_length_checked() {
        assert!(from_row_major(3, &[0.0; 8]).is_err());
    }

    #[test]
    fn traceless_equal_rows_residual_detects_structure() {
        let c = equal_rows_from(&[0.5, -0.2, -0.3]);
        assert!(equal_rows_traceless_residual(&c) < 1e-15);
        let mut broken = c.clone();
        broken[(2, 0)] += 1e-3;
        assert!(equal_rows_traceless_residual(&broken) > 1e-4);
    }
}
