//! Exact structured algebra of equal-rows, equal-input and zero-row-sum
//! matrices.
//!
//! All structured matrices are stored by their parameter vector only;
//! densification is an explicit O(d²) conversion. This keeps the product
//! rules `C_x·C_y = x·C_y` and `Q_x·Q_y = −y·Q_x` exact and O(d).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::{Error, Result};

/// Entrywise tolerance for the Markov / rate-matrix predicates. Quadrature
/// upstream produces near-boundary values, so exact nonnegativity is too
/// strict.
pub const PREDICATE_TOL: f64 = 1e-12;

/// Relative singular-value threshold for the numeric null-space dimension.
pub const NULLSPACE_REL_TOL: f64 = 1e-10;

/// A d-dimensional real parameter vector together with its cached summatory
/// parameter `x = Σᵢ xᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    entries: Vec<f64>,
    summatory: f64,
}

impl ParamVector {
    /// Requires `d ≥ 2` and finite entries.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::DimensionMismatch {
                left: entries.len(),
                right: 2,
            });
        }
        if let Some(bad) = entries.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput(format!("parameter entry {bad}")));
        }
        let summatory = entries.iter().sum();
        Ok(Self { entries, summatory })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    /// Standard unit vector `e_i` (0-based index).
    pub fn unit(dim: usize, i: usize) -> Result<Self> {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Self::new(v)
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// The cached summatory parameter `x = Σᵢ xᵢ`.
    pub fn summatory(&self) -> f64 {
        self.summatory
    }

    pub fn scale(&self, lambda: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|x| lambda * x).collect(),
            summatory: self.entries.iter().map(|x| lambda * x).sum(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim())?;
        ParamVector::new(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn is_nonnegative(&self, tol: f64) -> bool {
        self.entries.iter().all(|&x| x >= -tol)
    }

    fn check_dim(&self, other: usize) -> Result<()> {
        if self.dim() != other {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other,
            });
        }
        Ok(())
    }
}

/// The equal-rows matrix `C_x`: every row equals the parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualRowsMatrix {
    pub params: ParamVector,
}

impl EqualRowsMatrix {
    pub fn new(params: ParamVector) -> Self {
        Self { params }
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn summatory(&self) -> f64 {
        self.params.summatory()
    }

    pub fn densify(&self) -> DMatrix<f64> {
        dense::equal_rows_from(self.params.entries())
    }
}

/// The equal-input matrix `M_x = (1 − x)·I + C_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualInputMatrix {
    pub params: ParamVector,
}

impl EqualInputMatrix {
    pub fn new(params: ParamVector) -> Self {
        Self { params }
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Ok(Self::new(ParamVector::zeros(dim)?))
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn summatory(&self) -> f64 {
        self.params.summatory()
    }

    pub fn densify(&self) -> DMatrix<f64> {
        let d = self.dim();
        let x = self.summatory();
        let p = self.params.entries();
        DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 - x + p[j] } else { p[j] })
    }

    /// Markov predicate: `x ≥ 0` entrywise and `1 + xᵢ ≥ x` for all `i`,
    /// within [`PREDICATE_TOL`].
    pub fn is_markov(&self) -> bool {
        let x = self.summatory();
        self.params.is_nonnegative(PREDICATE_TOL)
            && self
                .params
                .entries()
                .iter()
                .all(|&xi| 1.0 + xi - x >= -PREDICATE_TOL)
    }

    /// Recovers the parameter vector from a dense matrix of equal-input form,
    /// returning the fit and the max-abs reconstruction residual.
    ///
    /// Off-diagonal entries of column `j` determine `x_j`; the diagonal and
    /// the row sums then over-determine the fit.
    pub fn fit_dense(m: &DMatrix<f64>) -> Result<(Self, f64)> {
        let d = m.nrows();
        if d != m.ncols() || d < 2 {
            return Err(Error::DimensionMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        let mut params = vec![0.0; d];
        for (j, p) in params.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..d {
                if i != j {
                    acc += m[(i, j)];
                }
            }
            *p = acc / (d as f64 - 1.0);
        }
        let fitted = Self::new(ParamVector::new(params)?);
        let residual = dense::max_abs_diff(m, &fitted.densify());
        Ok((fitted, residual))
    }
}

/// The equal-input generator `Q_x = −x·I + C_x`, with zero row sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualInputGenerator {
    pub params: ParamVector,
}

impl EqualInputGenerator {
    pub fn new(params: ParamVector) -> Self {
        Self { params }
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Ok(Self::new(ParamVector::zeros(dim)?))
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn summatory(&self) -> f64 {
        self.params.summatory()
    }

    pub fn densify(&self) -> DMatrix<f64> {
        let d = self.dim();
        let x = self.summatory();
        let p = self.params.entries();
        DMatrix::from_fn(d, d, |i, j| if i == j { p[j] - x } else { p[j] })
    }

    /// Rate-matrix predicate: `x ≥ 0` entrywise within [`PREDICATE_TOL`].
    pub fn is_rate_matrix(&self) -> bool {
        self.params.is_nonnegative(PREDICATE_TOL)
    }

    /// Scalar homogeneity `λ·Q_x = Q_{λx}`.
    pub fn scale(&self, lambda: f64) -> Self {
        Self::new(self.params.scale(lambda))
    }

    /// Recovers the parameter vector from a dense zero-row-sum matrix of
    /// equal-input form, returning the fit and the reconstruction residual.
    pub fn fit_dense(m: &DMatrix<f64>) -> Result<(Self, f64)> {
        let d = m.nrows();
        if d != m.ncols() || d < 2 {
            return Err(Error::DimensionMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        let mut params = vec![0.0; d];
        for (j, p) in params.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..d {
                if i != j {
                    acc += m[(i, j)];
                }
            }
            *p = acc / (d as f64 - 1.0);
        }
        let fitted = Self::new(ParamVector::new(params)?);
        let residual = dense::max_abs_diff(m, &fitted.densify());
        Ok((fitted, residual))
    }
}

/// `C_x · C_y = x · C_y`.
pub fn c_product(a: &EqualRowsMatrix, b: &EqualRowsMatrix) -> Result<EqualRowsMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(EqualRowsMatrix::new(b.params.scale(a.summatory())))
}

/// `Q_x · Q_y = −y · Q_x`.
pub fn q_product(a: &EqualInputGenerator, b: &EqualInputGenerator) -> Result<EqualInputGenerator> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(a.scale(-b.summatory()))
}

/// Splits `Q_x = x·(J_d − I) + C_r` into its constant-input part and its
/// trace-zero equal-rows part, with `J_d = (1/d)·C_1` and
/// `r = x − (x/d)·1`. The decomposition is unique.
pub fn decompose(q: &EqualInputGenerator) -> (f64, EqualRowsMatrix) {
    let d = q.dim() as f64;
    let x = q.summatory();
    let shift = x / d;
    let r: Vec<f64> = q.params.entries().iter().map(|xi| xi - shift).collect();
    let traceless = EqualRowsMatrix::new(ParamVector::new(r).expect("dim preserved"));
    (x, traceless)
}

/// Dense form of the constant-input generator basis element `J_d − I`.
pub fn constant_input_basis(dim: usize) -> DMatrix<f64> {
    let d = dim as f64;
    DMatrix::from_fn(
        dim,
        dim,
        |i, j| if i == j { 1.0 / d - 1.0 } else { 1.0 / d },
    )
}

/// Spectrum `{1} ∪ {1 − x (multiplicity d−1)}` and determinant `(1−x)^{d−1}`
/// of an equal-input matrix.
pub fn spectrum_and_det(m: &EqualInputMatrix) -> (Vec<f64>, f64) {
    let d = m.dim();
    let x = m.summatory();
    let mut eigs = Vec::with_capacity(d);
    eigs.push(1.0);
    eigs.extend(std::iter::repeat_n(1.0 - x, d - 1));
    (eigs, (1.0 - x).powi(d as i32 - 1))
}

/// The `d + 2` extremal elements of the convex set of equal-input Markov
/// matrices: `C_{e_i}` for each `i`, the identity, and `(C_1 − I)/(d−1)`.
pub fn extremal_vertices(dim: usize) -> Result<Vec<EqualInputMatrix>> {
    if dim < 2 {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: 2,
        });
    }
    let mut out = Vec::with_capacity(dim + 2);
    for i in 0..dim {
        out.push(EqualInputMatrix::new(ParamVector::unit(dim, i)?));
    }
    out.push(EqualInputMatrix::identity(dim)?);
    let c = 1.0 / (dim as f64 - 1.0);
    out.push(EqualInputMatrix::new(ParamVector::new(vec![c; dim])?));
    Ok(out)
}

/// Structural report for an equal-rows matrix: nilpotency, numeric null-space
/// dimension, and nil-ideal product residuals against supplied witnesses.
#[derive(Debug, Clone)]
pub struct StructureReport {
    pub is_nilpotent: bool,
    /// 0 for the zero matrix, 2 for nonzero trace-zero matrices, `None` when
    /// the matrix is not nilpotent.
    pub nilpotency_degree: Option<u8>,
    pub null_space_dim: usize,
    /// Max-abs of `A·C` for each supplied zero-row-sum witness `A`.
    pub left_ideal_residuals: Vec<f64>,
    /// Max-abs of `C_x·C_y` for each supplied trace-zero witness `C_y`.
    pub nil_product_residuals: Vec<f64>,
}

/// Witnesses for the nil-ideal checks `A·C = 0` (any `A` with zero row sums)
/// and `C_x·C_y = 0` (trace-zero `C_y`).
#[derive(Debug, Clone, Default)]
pub struct StructureWitnesses {
    pub zero_row_sum: Vec<DMatrix<f64>>,
    pub trace_zero: Vec<EqualRowsMatrix>,
}

/// Verifies the nilpotency and ideal structure of `C_x`.
pub fn verify_structure(c: &EqualRowsMatrix, witnesses: &StructureWitnesses) -> StructureReport {
    let x = c.summatory();
    let scale = c
        .params
        .entries()
        .iter()
        .fold(0.0_f64, |a, &v| a.max(v.abs()))
        .max(1.0);
    let is_zero = c.params.entries().iter().all(|&v| v == 0.0);
    let is_nilpotent = x.abs() <= 1e-12 * scale;
    let nilpotency_degree = if is_zero {
        Some(0)
    } else if is_nilpotent {
        Some(2)
    } else {
        None
    };

    let d = c.densify();
    let svd = d.clone().svd(false, false);
    let sigma_max = svd.singular_values.iter().fold(0.0_f64, |a, &s| a.max(s));
    let threshold = NULLSPACE_REL_TOL * sigma_max;
    let null_space_dim = if sigma_max == 0.0 {
        c.dim()
    } else {
        svd.singular_values
            .iter()
            .filter(|&&s| s <= threshold)
            .count()
    };

    let left_ideal_residuals = witnesses
        .zero_row_sum
        .iter()
        .map(|a| dense::max_abs(&(a * &d)))
        .collect();
    let nil_product_residuals = witnesses
        .trace_zero
        .iter()
        .map(|cy| {
            let prod = c_product(c, cy).map(|p| p.densify());
            prod.map(|p| dense::max_abs(&p)).unwrap_or(f64::INFINITY)
        })
        .collect();

    StructureReport {
        is_nilpotent,
        nilpotency_degree,
        null_space_dim,
        left_ideal_residuals,
        nil_product_residuals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{max_abs, max_abs_diff};
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn param_vector_requires_dim_two() {
        assert!(ParamVector::new(vec![1.0]).is_err());
        assert!(ParamVector::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn summatory_matches_recomputation() {
        let v = pv(&[0.1, 0.2, 0.3, -0.05]);
        let recomputed: f64 = v.entries().iter().sum();
        assert_eq!(v.summatory(), recomputed);
    }

    #[test]
    fn c_product_integer_example() {
        // C_(1,2) · C_(3,4) = C_(9,12)
        let a = EqualRowsMatrix::new(pv(&[1.0, 2.0]));
        let b = EqualRowsMatrix::new(pv(&[3.0, 4.0]));
        let r = c_product(&a, &b).unwrap();
        assert_eq!(r.params.entries(), &[9.0, 12.0]);
        assert_eq!(
            max_abs_diff(&r.densify(), &(a.densify() * b.densify())),
            0.0
        );
    }

    #[test]
    fn c_product_nilpotent_example() {
        // trace-zero left factor annihilates
        let a = EqualRowsMatrix::new(pv(&[1.0, -1.0]));
        let b = EqualRowsMatrix::new(pv(&[5.0, 7.0]));
        let r = c_product(&a, &b).unwrap();
        assert_eq!(r.params.entries(), &[0.0, 0.0]);
    }

    #[test]
    fn c_product_dimension_mismatch() {
        let a = EqualRowsMatrix::new(pv(&[1.0, 2.0]));
        let b = EqualRowsMatrix::new(pv(&[1.0, 2.0, 3.0]));
        assert!(c_product(&a, &b).is_err());
    }

    #[test]
    fn q_product_right_unit() {
        // Q_y with y-summatory −1 acts as a right unit.
        let a = EqualInputGenerator::new(pv(&[0.4, -0.1, 0.3]));
        let b = EqualInputGenerator::new(pv(&[-0.5, -0.25, -0.25]));
        assert!((b.summatory() + 1.0).abs() < 1e-15);
        let r = q_product(&a, &b).unwrap();
        assert_eq!(r.params.entries(), a.params.entries());
    }

    #[test]
    fn q_powers_follow_scalar_rule() {
        // Qⁿ = (−x)^{n−1} Q, checked densely for n ≤ 8.
        let q = EqualInputGenerator::new(pv(&[0.7, 0.1, 0.4, 0.2]));
        let x = q.summatory();
        let qd = q.densify();
        let mut power = qd.clone();
        for n in 1..=8 {
            let closed = q.scale((-x).powi(n - 1)).densify();
            assert!(max_abs_diff(&power, &closed) <= 1e-11 * max_abs(&closed).max(1.0));
            power *= &qd;
        }
    }

    #[test]
    fn decompose_constant_input() {
        let q = EqualInputGenerator::new(pv(&[1.0, 1.0]));
        let (scalar, traceless) = decompose(&q);
        assert_eq!(scalar, 2.0);
        assert_eq!(traceless.params.entries(), &[0.0, 0.0]);
    }

    #[test]
    fn decompose_unit_vector() {
        let q = EqualInputGenerator::new(pv(&[1.0, 0.0]));
        let (scalar, traceless) = decompose(&q);
        assert_eq!(scalar, 1.0);
        assert_eq!(traceless.params.entries(), &[0.5, -0.5]);
    }

    #[test]
    fn spectrum_of_maximal_markov_case() {
        // d = 2, x = d/(d−1) = 2: eigenvalues {1, −1}, det −1.
        let m = EqualInputMatrix::new(pv(&[1.0, 1.0]));
        let (eigs, det) = spectrum_and_det(&m);
        assert_eq!(eigs, vec![1.0, -1.0]);
        assert_eq!(det, -1.0);
    }

    #[test]
    fn spectrum_of_identity() {
        let m = EqualInputMatrix::identity(4).unwrap();
        let (eigs, det) = spectrum_and_det(&m);
        assert_eq!(eigs, vec![1.0; 4]);
        assert_eq!(det, 1.0);
    }

    #[test]
    fn spectrum_matches_dense_eigensolver() {
        let mut rng = crate::rng::Lcg::new(123);
        for _ in 0..10 {
            let m = EqualInputMatrix::new(pv(&rng.vector(5, -1.0, 1.0)));
            let (closed, det_closed) = spectrum_and_det(&m);
            let dense_m = m.densify();
            let mut numeric: Vec<f64> = crate::dense::eigenvalues(&dense_m)
                .unwrap()
                .iter()
                .map(|z| {
                    assert!(z.im.abs() < 1e-10, "spectrum should be real");
                    z.re
                })
                .collect();
            let mut expected = closed.clone();
            numeric.sort_by(|a, b| a.partial_cmp(b).unwrap());
            expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (n, e) in numeric.iter().zip(&expected) {
                assert!((n - e).abs() <= 1e-10 * e.abs().max(1.0));
            }
            assert!(
                (dense_m.determinant() - det_closed).abs() <= 1e-10 * det_closed.abs().max(1.0)
            );
        }
    }

    #[test]
    fn vertices_d2_are_the_four_known_matrices() {
        let vs = extremal_vertices(2).unwrap();
        assert_eq!(vs.len(), 4);
        let expect = [
            [[1.0, 0.0], [1.0, 0.0]],
            [[0.0, 1.0], [0.0, 1.0]],
            [[1.0, 0.0], [0.0, 1.0]],
            [[0.0, 1.0], [1.0, 0.0]],
        ];
        for (v, e) in vs.iter().zip(expect.iter()) {
            let d = v.densify();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((d[(i, j)] - e[i][j]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn vertices_d3_last_has_zero_diagonal() {
        let vs = extremal_vertices(3).unwrap();
        assert_eq!(vs.len(), 5);
        let last = vs.last().unwrap().densify();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 0.0 } else { 0.5 };
                assert!((last[(i, j)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn all_vertices_pass_markov_predicate_up_to_d8() {
        for d in 2..=8 {
            for v in extremal_vertices(d).unwrap() {
                assert!(v.is_markov(), "vertex of d={d} failed the Markov predicate");
            }
        }
    }

    #[test]
    fn vertices_rejects_d1() {
        assert!(extremal_vertices(1).is_err());
    }

    #[test]
    fn structure_of_trace_zero_c() {
        let c = EqualRowsMatrix::new(pv(&[1.0, -1.0]));
        let report = verify_structure(&c, &StructureWitnesses::default());
        assert!(report.is_nilpotent);
        assert_eq!(report.nilpotency_degree, Some(2));
        assert_eq!(report.null_space_dim, 1);
    }

    #[test]
    fn structure_of_zero_matrix() {
        let c = EqualRowsMatrix::new(pv(&[0.0, 0.0, 0.0]));
        let report = verify_structure(&c, &StructureWitnesses::default());
        assert_eq!(report.nilpotency_degree, Some(0));
        assert_eq!(report.null_space_dim, 3);
    }

    #[test]
    fn nil_ideal_annihilation_with_witnesses() {
        // Random-ish A ∈ A₀ (zero row sums) annihilates trace-zero C from the left.
        let d = 5;
        let mut a = DMatrix::from_fn(d, d, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        for i in 0..d {
            let s: f64 = a.row(i).iter().sum();
            a[(i, i)] -= s;
        }
        let c = EqualRowsMatrix::new(pv(&[2.0, -1.0, 0.5, -0.75, -0.75]));
        let witnesses = StructureWitnesses {
            zero_row_sum: vec![a],
            trace_zero: vec![EqualRowsMatrix::new(pv(&[1.0, 1.0, -2.0, 0.0, 0.0]))],
        };
        let report = verify_structure(&c, &witnesses);
        assert!(report.left_ideal_residuals[0] <= 1e-13);
        assert!(report.nil_product_residuals[0] <= 1e-13);
    }

    #[test]
    fn equal_input_fit_recovers_params() {
        let m = EqualInputMatrix::new(pv(&[0.2, 0.1, 0.05]));
        let (fit, res) = EqualInputMatrix::fit_dense(&m.densify()).unwrap();
        assert!(res < 1e-15);
        for (a, b) in fit.params.entries().iter().zip(m.params.entries()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]

        #[test]
        fn c_product_matches_dense(
            d in 2usize..=6,
            seed in any::<u64>(),
        ) {
            let mut rng = crate::rng::Lcg::new(seed);
            let a = EqualRowsMatrix::new(pv(&rng.vector(d, -10.0, 10.0)));
            let b = EqualRowsMatrix::new(pv(&rng.vector(d, -10.0, 10.0)));
            let structured = c_product(&a, &b).unwrap().densify();
            let dense = a.densify() * b.densify();
            prop_assert!(max_abs_diff(&structured, &dense) <= 1e-13 * max_abs(&dense).max(1.0));
        }

        #[test]
        fn q_product_matches_dense(
            d in 2usize..=6,
            seed in any::<u64>(),
        ) {
            let mut rng = crate::rng::Lcg::new(seed);
            let a = EqualInputGenerator::new(pv(&rng.vector(d, -10.0, 10.0)));
            let b = EqualInputGenerator::new(pv(&rng.vector(d, -10.0, 10.0)));
            let structured = q_product(&a, &b).unwrap().densify();
            let dense = a.densify() * b.densify();
            prop_assert!(max_abs_diff(&structured, &dense) <= 1e-12 * max_abs(&dense).max(1.0));
        }

        #[test]
        fn q_linearity(
            d in 2usize..=6,
            seed in any::<u64>(),
            t in -3.0f64..3.0,
            s in -3.0f64..3.0,
        ) {
            let mut rng = crate::rng::Lcg::new(seed);
            let x = pv(&rng.vector(d, -5.0, 5.0));
            let y = pv(&rng.vector(d, -5.0, 5.0));
            let qx = EqualInputGenerator::new(x.clone());
            let qy = EqualInputGenerator::new(y.clone());
            let lhs = qx.densify() * t + qy.densify() * s;
            let combo = EqualInputGenerator::new(x.scale(t).add(&y.scale(s)).unwrap());
            prop_assert!(max_abs_diff(&lhs, &combo.densify()) <= 1e-13 * max_abs(&lhs).max(1.0));
        }

        #[test]
        fn convex_combinations_of_vertices_are_markov(
            d in 2usize..=6,
            seed in any::<u64>(),
        ) {
            let mut rng = crate::rng::Lcg::new(seed);
            let vertices = extremal_vertices(d).unwrap();
            let mut weights = rng.vector(vertices.len(), 0.0, 1.0);
            let total: f64 = weights.iter().sum();
            prop_assume!(total > 1e-9);
            for w in &mut weights { *w /= total; }
            let mut combo = vec![0.0; d];
            for (w, v) in weights.iter().zip(&vertices) {
                for (c, p) in combo.iter_mut().zip(v.params.entries()) {
                    *c += w * p;
                }
            }
            let m = EqualInputMatrix::new(pv(&combo));
            prop_assert!(m.is_markov());
        }

        #[test]
        fn decompose_round_trips(
            d in 2usize..=6,
            seed in any::<u64>(),
        ) {
            let mut rng = crate::rng::Lcg::new(seed);
            let q = EqualInputGenerator::new(pv(&rng.vector(d, -5.0, 5.0)));
            let (scalar, traceless) = decompose(&q);
            prop_assert!(traceless.summatory().abs() <= 1e-14 * scalar.abs().max(1.0));
            let rebuilt = constant_input_basis(d) * scalar + traceless.densify();
            prop_assert!(max_abs_diff(&rebuilt, &q.densify()) <= 1e-14 * max_abs(&q.densify()).max(1.0));
            prop_assert!(traceless.densify().trace().abs() <= 1e-14 * scalar.abs().max(1.0));
        }
    }
}
