//! Closed-form solutions of `Ṁ = M·Q(t)`, `M(0) = I`.
//!
//! Every operation here is an explicit formula: the homogeneous equal-input
//! exponential, the equal-input BCH logarithm, the inhomogeneous equal-input
//! flow by variation of constants, the Liouville determinant, and the
//! perturbed and commuting families solved through the nil-ideal structure.
//! The numeric oracles in [`crate::oracles`] verify all of them.

use nalgebra::DMatrix;

use crate::algebra::{EqualInputGenerator, EqualInputMatrix, ParamVector, PREDICATE_TOL};
use crate::dense;
use crate::family::{CommutingFamily, EqualInputFamily, GeneratorFamily, PerturbedFamily};
use crate::kernels::{self, expm, h_scalar, matrix_kernel_eval, MatrixKernel};
use crate::quad::{self, cumulative_simpson, Partition};
use crate::{Error, Result};

/// Quadrature and series-truncation tolerances for the flow solvers.
#[derive(Debug, Clone, Copy)]
pub struct FlowTolerances {
    pub quadrature: f64,
    pub series: f64,
}

impl Default for FlowTolerances {
    fn default() -> Self {
        Self {
            quadrature: 1e-10,
            series: 1e-12,
        }
    }
}

/// Cap on the number of series terms for the perturbed and commuting flows.
pub const MAX_SERIES_TERMS: usize = 60;

/// Entrywise tolerance for declaring a dense logarithm a Markov generator.
pub const GENERATOR_TOL: f64 = 1e-10;

/// Solution trajectory of a flow on a time grid.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub grid: Vec<f64>,
    /// `M(t)` at each grid point (dense form)
    pub m: Vec<DMatrix<f64>>,
    /// parameter-vector trajectory, for equal-input families
    pub x_traj: Option<Vec<ParamVector>>,
    /// principal logarithm at each grid point, where the guards pass
    pub r: Vec<std::result::Result<DMatrix<f64>, Error>>,
    /// Liouville determinant at each grid point
    pub det: Vec<f64>,
    /// homogeneous-embeddability verdict per grid point (`None` when no
    /// logarithm was available to decide)
    pub embeddable: Vec<Option<bool>>,
    pub diagnostics: FlowDiagnostics,
}

#[derive(Debug, Clone, Default)]
pub struct FlowDiagnostics {
    /// error estimate of the final quadrature refinement
    pub quad_error: f64,
    /// panel-doubling exponent at convergence
    pub quad_refinements: u32,
    /// number of series terms used (perturbed/commuting kinds)
    pub series_terms: Option<usize>,
    /// max-abs disagreement between the exponential form and the direct
    /// Peano–Baker form (commuting kind)
    pub pbs_agreement: Option<f64>,
    /// worst residual of the trace-zero equal-rows membership of the series
    /// part (perturbed/commuting kinds)
    pub structure_residual: Option<f64>,
}

/// Sign classification of the Liouville determinant by the initial
/// summatory parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignClass {
    /// `x₀ < 1`: strictly positive for all time
    Positive,
    /// `x₀ = 1`: identically zero
    Zero,
    /// `x₀ > 1`: fixed sign, positive for odd `d`, negative for even `d`
    SignByParity { negative: bool },
}

/// `exp(t·Q_x) = M_{c(t)}` with `c(t) = t·h(t·x)·x`, valid for all real
/// parameters including the nilpotent case `x = 0`.
pub fn ei_exp(q: &EqualInputGenerator, t: f64) -> EqualInputMatrix {
    let x = q.summatory();
    let coeff = t * h_scalar(t * x);
    EqualInputMatrix::new(q.params.scale(coeff))
}

/// The unique equal-input real logarithm of `exp(Q_x)·exp(Q_y)`:
/// `(h(x)·e^{−y}·Q_x + h(y)·Q_y) / h(x+y)`. It is the principal matrix
/// logarithm of the product.
pub fn bch_log(a: &EqualInputGenerator, b: &EqualInputGenerator) -> Result<EqualInputGenerator> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (x, y) = (a.summatory(), b.summatory());
    let scale = 1.0 / h_scalar(x + y);
    let left = a.params.scale(scale * h_scalar(x) * (-y).exp());
    let right = b.params.scale(scale * h_scalar(y));
    Ok(EqualInputGenerator::new(left.add(&right)?))
}

/// Principal equal-input logarithm of `M_x` for `x < 1`:
/// `R = (−log(1−x)/x)·Q_x`, together with the homogeneous-embeddability
/// verdict (`true` iff the parameters are entrywise nonnegative, making `R`
/// a Markov generator).
pub fn ei_principal_log(m: &EqualInputMatrix) -> Result<(EqualInputGenerator, bool)> {
    let x = m.summatory();
    if x >= 1.0 {
        return Err(Error::XGeOne { x });
    }
    let coeff = if x == 0.0 { 1.0 } else { -f64::ln_1p(-x) / x };
    let r = EqualInputGenerator::new(m.params.scale(coeff));
    let embeddable = m.params.is_nonnegative(PREDICATE_TOL);
    Ok((r, embeddable))
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid[0] != 0.0 {
        return Err(Error::InvalidGrid("grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid(
            "grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn grid_indices(partition: &Partition, grid: &[f64]) -> Vec<usize> {
    grid.iter()
        .map(|&t| {
            partition
                .index_of_break(t)
                .expect("grid points are partition breaks")
        })
        .collect()
}

/// Inhomogeneous equal-input flow by variation of constants:
/// `x(t) = e^{−Φ(t)} ∫₀ᵗ q(τ)·e^{Φ(τ)} dτ` with `Φ(t) = ∫₀ᵗ q`, and
/// `M(t) = M_{x(t)}`. The scalar reduction gives `x(t) = 1 − e^{−Φ(t)} < 1`.
pub fn ei_flow(family: &EqualInputFamily, grid: &[f64], quad_tol: f64) -> Result<FlowResult> {
    check_grid(grid)?;
    if quad_tol.is_nan() || quad_tol <= 0.0 {
        return Err(Error::InvalidGrid(format!(
            "tolerance must be positive, got {quad_tol}"
        )));
    }
    let horizon = *grid.last().unwrap();
    let breaks = quad::merge_breaks(grid, &family.q.breakpoints_within(horizon));

    let converged = quad::converge_on_partition(&breaks, quad_tol, |partition| {
        let q_sum = partition.sample(|t, s| family.q.summatory_in(t, s));
        let phi = cumulative_simpson(partition, &q_sum);
        let weighted: Vec<Vec<f64>> = partition
            .nodes()
            .iter()
            .zip(partition.selectors())
            .zip(&phi)
            .map(|((&t, &s), &p)| {
                let e = p.exp();
                family
                    .q
                    .eval_raw_in(t, s)
                    .into_iter()
                    .map(|v| v * e)
                    .collect()
            })
            .collect();
        let integral = cumulative_simpson(partition, &weighted);
        let idx = grid_indices(partition, grid);
        Ok(idx
            .into_iter()
            .map(|i| {
                let damp = (-phi[i]).exp();
                integral[i].iter().map(|v| v * damp).collect::<Vec<f64>>()
            })
            .collect())
    })?;

    let d = family.q.dim();
    let mut m = Vec::with_capacity(grid.len());
    let mut x_traj = Vec::with_capacity(grid.len());
    let mut r = Vec::with_capacity(grid.len());
    let mut det = Vec::with_capacity(grid.len());
    let mut embeddable = Vec::with_capacity(grid.len());
    for x in &converged.values {
        let params = ParamVector::new(x.clone())?;
        let mx = EqualInputMatrix::new(params.clone());
        det.push((1.0 - params.summatory()).powi(d as i32 - 1));
        match ei_principal_log(&mx) {
            Ok((log, emb)) => {
                r.push(Ok(log.densify()));
                embeddable.push(Some(emb));
            }
            Err(e) => {
                r.push(Err(e));
                embeddable.push(None);
            }
        }
        m.push(mx.densify());
        x_traj.push(params);
    }

    Ok(FlowResult {
        grid: grid.to_vec(),
        m,
        x_traj: Some(x_traj),
        r,
        det,
        embeddable,
        diagnostics: FlowDiagnostics {
            quad_error: converged.error_estimate,
            quad_refinements: converged.refinements,
            ..Default::default()
        },
    })
}

/// Liouville determinant flow `det M(t) = det M(0)·exp(∫₀ᵗ tr Q)` together
/// with the sign class determined by the initial summatory parameter.
pub fn det_flow(
    family: &GeneratorFamily,
    m0_det: f64,
    x0: f64,
    grid: &[f64],
) -> Result<(Vec<f64>, SignClass)> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid(
            "grid must be nonempty and increasing".into(),
        ));
    }
    let horizon = *grid.last().unwrap();
    let breaks = quad::merge_breaks(grid, &family.breakpoints_within(horizon));
    let converged = quad::converge_on_partition(&breaks, 1e-12, |partition| {
        let samples = partition.sample(|t, s| family.trace_in(t, s));
        let cumulative = cumulative_simpson(partition, &samples);
        let idx = grid_indices(partition, grid);
        Ok(idx.into_iter().map(|i| cumulative[i]).collect())
    })?;
    let det: Vec<f64> = converged.values.iter().map(|&s| m0_det * s.exp()).collect();
    let d = family.dim();
    let class = if (x0 - 1.0).abs() <= 1e-12 {
        SignClass::Zero
    } else if x0 < 1.0 {
        SignClass::Positive
    } else {
        SignClass::SignByParity {
            negative: d.is_multiple_of(2),
        }
    };
    Ok((det, class))
}

/// The weighted-integral form of the equal-input principal logarithm:
/// `R(t) = f(u(t)) ∫₀ᵗ e^{u(τ)}·Q(τ) dτ` with `u = ∫ μ` and `μ(t) = q(t)`
/// the summatory of the family. Agrees with the direct logarithm of the
/// flow solution.
pub fn weighted_integral_log(
    family: &EqualInputFamily,
    t: f64,
    quad_tol: f64,
) -> Result<EqualInputGenerator> {
    if t == 0.0 {
        return EqualInputGenerator::zero(family.q.dim());
    }
    let grid = [0.0, t];
    check_grid(&grid)?;
    let breaks = quad::merge_breaks(&grid, &family.q.breakpoints_within(t));
    let converged = quad::converge_on_partition(&breaks, quad_tol, |partition| {
        let mu = partition.sample(|v, s| family.q.summatory_in(v, s));
        let u = cumulative_simpson(partition, &mu);
        let weighted: Vec<Vec<f64>> = partition
            .nodes()
            .iter()
            .zip(partition.selectors())
            .zip(&u)
            .map(|((&v, &s), &uv)| {
                let e = uv.exp();
                family
                    .q
                    .eval_raw_in(v, s)
                    .into_iter()
                    .map(|w| w * e)
                    .collect()
            })
            .collect();
        let integral = cumulative_simpson(partition, &weighted);
        let end = *grid_indices(partition, &grid).last().unwrap();
        // pack u(t) in front of the integral row
        let mut packed = vec![u[end]];
        packed.extend_from_slice(&integral[end]);
        Ok(vec![packed])
    })?;
    let packed = &converged.values[0];
    let u_t = packed[0];
    let coeff = kernels::f_scalar(u_t);
    let params: Vec<f64> = packed[1..].iter().map(|&y| coeff * y).collect();
    Ok(EqualInputGenerator::new(ParamVector::new(params)?))
}

/// Converged cumulative data for a perturbed family on a grid: `u(tᵢ)` and
/// the rows of the series part and the log integrand.
struct PerturbedGridData {
    u: Vec<f64>,
    /// Σₙ q⁽ⁿ⁾(tᵢ)·Q₀ⁿ⁻¹ — the equal-rows row of A△(tᵢ)
    a_rows: Vec<Vec<f64>>,
    /// ∫₀^{tᵢ} q(τ)·e^{−u(τ)Q₀} dτ — the equal-rows row of the R△ integral
    log_rows: Vec<Vec<f64>>,
    series_terms: usize,
    quad_error: f64,
    quad_refinements: u32,
}

fn perturbed_grid_data(
    family: &PerturbedFamily,
    grid: &[f64],
    tols: FlowTolerances,
) -> Result<PerturbedGridData> {
    let d = family.q.dim();
    let horizon = *grid.last().unwrap();
    family.validate_as_generator(horizon)?;
    let breaks = quad::merge_breaks(grid, &{
        let mut b = family.q.breakpoints_within(horizon);
        family.mu.breakpoints_within(horizon, &mut b);
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b
    });

    let series_terms = std::cell::Cell::new(0usize);
    let converged = quad::converge_on_partition(&breaks, tols.quadrature, |partition| {
        let nodes = partition.nodes();
        let idx = grid_indices(partition, grid);
        let mu = partition.sample(|t, s| family.mu.eval_in(t, s));
        let u = cumulative_simpson(partition, &mu);

        // iterated integrals q⁽¹⁾ = ∫q, q⁽ⁿ⁺¹⁾ = ∫ μ·q⁽ⁿ⁾
        let q_samples: Vec<Vec<f64>> = partition.sample(|t, s| family.q.eval_raw_in(t, s));
        let mut q_n = cumulative_simpson(partition, &q_samples);
        let mut a_rows: Vec<Vec<f64>> = idx.iter().map(|_| vec![0.0; d]).collect();
        let mut q0_power = DMatrix::<f64>::identity(d, d);
        let mut terms = 0;
        loop {
            terms += 1;
            let mut worst = 0.0_f64;
            for (row, &i) in a_rows.iter_mut().zip(&idx) {
                let contribution = dense::row_times_matrix(&q_n[i], &q0_power);
                for (acc, c) in row.iter_mut().zip(&contribution) {
                    *acc += c;
                }
                worst = worst.max(contribution.iter().fold(0.0_f64, |a, &v| a.max(v.abs())));
            }
            let scale = a_rows
                .iter()
                .flat_map(|r| r.iter())
                .fold(1.0_f64, |a, &v| a.max(v.abs()));
            if worst <= tols.series * scale {
                break;
            }
            if terms >= MAX_SERIES_TERMS {
                return Err(Error::SeriesNotConverged {
                    tol: tols.series,
                    max_terms: MAX_SERIES_TERMS,
                    last: worst,
                });
            }
            let weighted: Vec<Vec<f64>> = q_n
                .iter()
                .zip(&mu)
                .map(|(qv, &m)| qv.iter().map(|&v| v * m).collect())
                .collect();
            q_n = cumulative_simpson(partition, &weighted);
            q0_power = &q0_power * &family.q0;
        }
        series_terms.set(terms);

        // log integrand rows q(τ)·e^{−u(τ)Q₀}
        let log_samples: Vec<Vec<f64>> = nodes
            .iter()
            .zip(partition.selectors())
            .zip(&u)
            .map(|((&t, &s), &ut)| {
                let e = expm(&(&family.q0 * (-ut)));
                dense::row_times_matrix(&family.q.eval_raw_in(t, s), &e)
            })
            .collect();
        let log_cumulative = cumulative_simpson(partition, &log_samples);

        // pack everything into one comparable value per grid point:
        // [u, a_row…, log_row…]
        Ok(idx
            .iter()
            .zip(&a_rows)
            .map(|(&i, a_row)| {
                let mut packed = Vec::with_capacity(1 + 2 * d);
                packed.push(u[i]);
                packed.extend_from_slice(a_row);
                packed.extend_from_slice(&log_cumulative[i]);
                packed
            })
            .collect())
    })?;

    let mut u = Vec::with_capacity(grid.len());
    let mut a_rows = Vec::with_capacity(grid.len());
    let mut log_rows = Vec::with_capacity(grid.len());
    for packed in &converged.values {
        u.push(packed[0]);
        a_rows.push(packed[1..=d].to_vec());
        log_rows.push(packed[d + 1..].to_vec());
    }
    Ok(PerturbedGridData {
        u,
        a_rows,
        log_rows,
        series_terms: series_terms.get(),
        quad_error: converged.error_estimate,
        quad_refinements: converged.refinements,
    })
}

impl PerturbedFamily {
    fn validate_as_generator(&self, horizon: f64) -> Result<()> {
        GeneratorFamily::Perturbed(self.clone()).validate(horizon)
    }
}

impl CommutingFamily {
    fn validate_as_generator(&self, horizon: f64) -> Result<()> {
        GeneratorFamily::Commuting(self.clone()).validate(horizon)
    }
}

/// Flow of the perturbed family `Q(t) = μ(t)·Q₀ + C_{q(t)}` in the additive
/// Peano–Baker form `M(t) = e^{u(t)Q₀} + A△(t)`, where the series part
/// `A△(t) = Σₙ C_{q⁽ⁿ⁾(t)}·Q₀ⁿ⁻¹` lives in the trace-zero equal-rows ideal.
pub fn perturbed_flow(
    family: &PerturbedFamily,
    grid: &[f64],
    tols: FlowTolerances,
) -> Result<FlowResult> {
    check_grid(grid)?;
    let data = perturbed_grid_data(family, grid, tols)?;

    let mut m = Vec::with_capacity(grid.len());
    let mut r = Vec::with_capacity(grid.len());
    let mut embeddable = Vec::with_capacity(grid.len());
    let mut structure_residual = 0.0_f64;
    for i in 0..grid.len() {
        let a_delta = dense::equal_rows_from(&data.a_rows[i]);
        structure_residual = structure_residual.max(dense::equal_rows_traceless_residual(&a_delta));
        let m_i = expm(&(&family.q0 * data.u[i])) + &a_delta;
        m.push(m_i);
        match perturbed_log_from_parts(family, data.u[i], &data.log_rows[i]) {
            Ok(r_i) => {
                embeddable.push(Some(is_generator(&r_i)));
                r.push(Ok(r_i));
            }
            Err(e) => {
                embeddable.push(None);
                r.push(Err(e));
            }
        }
    }
    let (det, _) = det_flow(&GeneratorFamily::Perturbed(family.clone()), 1.0, 0.0, grid)?;

    Ok(FlowResult {
        grid: grid.to_vec(),
        m,
        x_traj: None,
        r,
        det,
        embeddable,
        diagnostics: FlowDiagnostics {
            quad_error: data.quad_error,
            quad_refinements: data.quad_refinements,
            series_terms: Some(data.series_terms),
            structure_residual: Some(structure_residual),
            ..Default::default()
        },
    })
}

/// Assembles `R(t) = u(t)·Q₀ + R△(t)` with
/// `R△(t) = [∫₀ᵗ C_{q(τ)}·e^{−u(τ)Q₀} dτ]·f(−u(t)Q₀)`, guarding the
/// eigenvalues of `u(t)·Q₀` against the poles of `f`.
fn perturbed_log_from_parts(
    family: &PerturbedFamily,
    u_t: f64,
    log_row: &[f64],
) -> Result<DMatrix<f64>> {
    let f_arg = &family.q0 * (-u_t);
    let f_val = matrix_kernel_eval(MatrixKernel::F, &f_arg)?;
    let r_delta_row = dense::row_times_matrix(log_row, &f_val);
    Ok(&family.q0 * u_t + dense::equal_rows_from(&r_delta_row))
}

/// Principal logarithm of the perturbed flow at a single time.
pub fn perturbed_log(
    family: &PerturbedFamily,
    t: f64,
    tols: FlowTolerances,
) -> Result<DMatrix<f64>> {
    let d = family.q.dim();
    if t == 0.0 {
        return Ok(DMatrix::zeros(d, d));
    }
    let grid = [0.0, t];
    check_grid(&grid)?;
    let data = perturbed_grid_data(family, &grid, tols)?;
    perturbed_log_from_parts(family, data.u[1], &data.log_rows[1])
}

/// The trace-zero equal-rows part `R△(t)` of the perturbed logarithm.
pub fn perturbed_log_delta(
    family: &PerturbedFamily,
    t: f64,
    tols: FlowTolerances,
) -> Result<DMatrix<f64>> {
    let d = family.q.dim();
    if t == 0.0 {
        return Ok(DMatrix::zeros(d, d));
    }
    let grid = [0.0, t];
    let data = perturbed_grid_data(family, &grid, tols)?;
    let full = perturbed_log_from_parts(family, data.u[1], &data.log_rows[1])?;
    Ok(full - &family.q0 * data.u[1])
}

fn is_generator(r: &DMatrix<f64>) -> bool {
    let d = r.nrows();
    if dense::row_sum_residual(r, 0.0) > GENERATOR_TOL {
        return false;
    }
    (0..d).all(|i| (0..d).all(|j| i == j || r[(i, j)] >= -GENERATOR_TOL))
}

/// Flow and principal logarithm of the commuting family
/// `Q(t) = Q₀(t) + C_{q(t)}` at a single time, with
/// `R₀(t) = ∫₀ᵗ Q₀(τ) dτ` and
/// `R△(t) = [∫₀ᵗ C_{q(τ)}·e^{−R₀(τ)} dτ]·f(−R₀(t))`.
///
/// Also evaluates the direct Peano–Baker form
/// `M = e^{R₀(t)} + Σₙ Q△⁽ⁿ⁾(t)` with
/// `Q△⁽ⁿ⁺¹⁾(t) = ∫₀ᵗ Q△⁽ⁿ⁾(τ)·Q₀(τ) dτ` and records the agreement between
/// the two routes.
#[derive(Debug, Clone)]
pub struct CommutingFlowLog {
    pub r0: DMatrix<f64>,
    pub r_delta: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// `exp(R)`
    pub m: DMatrix<f64>,
    /// the direct Peano–Baker form of `M`
    pub m_pbs: DMatrix<f64>,
    /// max-abs difference between the two forms of `M`
    pub agreement: f64,
    pub series_terms: usize,
}

pub fn commuting_flow_log(
    family: &CommutingFamily,
    t: f64,
    tols: FlowTolerances,
) -> Result<CommutingFlowLog> {
    let d = family.q.dim();
    family.validate_as_generator(t.max(f64::MIN_POSITIVE))?;
    if t == 0.0 {
        let eye = DMatrix::identity(d, d);
        return Ok(CommutingFlowLog {
            r0: DMatrix::zeros(d, d),
            r_delta: DMatrix::zeros(d, d),
            r: DMatrix::zeros(d, d),
            m: eye.clone(),
            m_pbs: eye,
            agreement: 0.0,
            series_terms: 0,
        });
    }
    let grid = [0.0, t];
    check_grid(&grid)?;
    let mut extra = family.q.breakpoints_within(t);
    for (coeff, _) in &family.terms {
        coeff.breakpoints_within(t, &mut extra);
    }
    extra.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let breaks = quad::merge_breaks(&grid, &extra);
    let n_terms = family.terms.len();
    let series_terms = std::cell::Cell::new(0usize);

    let converged = quad::converge_on_partition(&breaks, tols.quadrature, |partition| {
        let nodes = partition.nodes();
        let selectors = partition.selectors();
        let end = *grid_indices(partition, &grid).last().unwrap();

        // coefficient integrals cᵢ(τ) = ∫ aᵢ, giving R₀(τ) = Σ cᵢ(τ)·Kᵢ
        let mut coeff_cumulative: Vec<Vec<f64>> = Vec::with_capacity(n_terms);
        for (coeff, _) in &family.terms {
            let samples = partition.sample(|v, s| coeff.eval_in(v, s));
            coeff_cumulative.push(cumulative_simpson(partition, &samples));
        }
        let r0_at = |i: usize| -> DMatrix<f64> {
            let mut acc = DMatrix::zeros(d, d);
            for (k, (_, mat)) in family.terms.iter().enumerate() {
                acc += mat * coeff_cumulative[k][i];
            }
            acc
        };

        // log integrand rows q(τ)·e^{−R₀(τ)}
        let log_samples: Vec<Vec<f64>> = (0..nodes.len())
            .map(|i| {
                let e = expm(&(-r0_at(i)));
                dense::row_times_matrix(&family.q.eval_raw_in(nodes[i], selectors[i]), &e)
            })
            .collect();
        let log_cumulative = cumulative_simpson(partition, &log_samples);

        // direct Peano–Baker rows: w₁ = ∫q, wₙ₊₁ = ∫ wₙ·Q₀(τ)
        let q_samples: Vec<Vec<f64>> = partition.sample(|v, s| family.q.eval_raw_in(v, s));
        let mut w_n = cumulative_simpson(partition, &q_samples);
        let mut pbs_row = vec![0.0; d];
        let mut terms = 0;
        loop {
            terms += 1;
            for (acc, c) in pbs_row.iter_mut().zip(&w_n[end]) {
                *acc += c;
            }
            let worst = w_n[end].iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
            let scale = pbs_row.iter().fold(1.0_f64, |a, &v| a.max(v.abs()));
            if worst <= tols.series * scale {
                break;
            }
            if terms >= MAX_SERIES_TERMS {
                return Err(Error::SeriesNotConverged {
                    tol: tols.series,
                    max_terms: MAX_SERIES_TERMS,
                    last: worst,
                });
            }
            let weighted: Vec<Vec<f64>> = (0..nodes.len())
                .map(|i| {
                    let mut q0_i = DMatrix::zeros(d, d);
                    for (coeff, mat) in &family.terms {
                        q0_i += mat * coeff.eval_in(nodes[i], selectors[i]);
                    }
                    dense::row_times_matrix(&w_n[i], &q0_i)
                })
                .collect();
            w_n = cumulative_simpson(partition, &weighted);
        }
        series_terms.set(terms);

        // packed value: [c₁(t)…c_k(t), log_row…, pbs_row…]
        let mut packed = Vec::with_capacity(n_terms + 2 * d);
        for c in &coeff_cumulative {
            packed.push(c[end]);
        }
        packed.extend_from_slice(&log_cumulative[end]);
        packed.extend_from_slice(&pbs_row);
        Ok(vec![packed])
    })?;

    let packed = &converged.values[0];
    let coeffs = &packed[..n_terms];
    let log_row = &packed[n_terms..n_terms + d];
    let pbs_row = &packed[n_terms + d..];

    let mut r0 = DMatrix::zeros(d, d);
    for (c, (_, mat)) in coeffs.iter().zip(&family.terms) {
        r0 += mat * *c;
    }
    let f_val = matrix_kernel_eval(MatrixKernel::F, &(-&r0))?;
    let r_delta = dense::equal_rows_from(&dense::row_times_matrix(log_row, &f_val));
    let r = &r0 + &r_delta;
    let m = expm(&r);
    let m_pbs = expm(&r0) + dense::equal_rows_from(pbs_row);
    let agreement = dense::max_abs_diff(&m, &m_pbs);

    Ok(CommutingFlowLog {
        r0,
        r_delta,
        r,
        m,
        m_pbs,
        agreement,
        series_terms: series_terms.get(),
    })
}

/// Dispatches the closed-form flow for any family kind on a grid.
pub fn flow(family: &GeneratorFamily, grid: &[f64], tols: FlowTolerances) -> Result<FlowResult> {
    match family {
        GeneratorFamily::EqualInput(f) => ei_flow(f, grid, tols.quadrature),
        GeneratorFamily::Perturbed(f) => perturbed_flow(f, grid, tols),
        GeneratorFamily::Commuting(f) => {
            check_grid(grid)?;
            let mut m = Vec::with_capacity(grid.len());
            let mut r = Vec::with_capacity(grid.len());
            let mut embeddable = Vec::with_capacity(grid.len());
            let mut diagnostics = FlowDiagnostics::default();
            let mut worst_agreement = 0.0_f64;
            let mut structure_residual = 0.0_f64;
            for &t in grid {
                let sol = commuting_flow_log(f, t, tols)?;
                worst_agreement = worst_agreement.max(sol.agreement);
                structure_residual =
                    structure_residual.max(dense::equal_rows_traceless_residual(&sol.r_delta));
                embeddable.push(Some(is_generator(&sol.r)));
                m.push(sol.m);
                r.push(Ok(sol.r));
                diagnostics.series_terms = Some(sol.series_terms);
            }
            diagnostics.pbs_agreement = Some(worst_agreement);
            diagnostics.structure_residual = Some(structure_residual);
            let (det, _) = det_flow(family, 1.0, 0.0, grid)?;
            Ok(FlowResult {
                grid: grid.to_vec(),
                m,
                x_traj: None,
                r,
                det,
                embeddable,
                diagnostics,
            })
        }
    }
}
