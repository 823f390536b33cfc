//! Generator families for the Cauchy problem `Ṁ = M·Q(t)`, `M(0) = I`.
//!
//! Three kinds are supported:
//!
//! * `EqualInput` — `Q(t) = Q_{q(t)}`, all values in the equal-input algebra;
//! * `Perturbed` — `Q(t) = μ(t)·Q₀ + C_{q(t)}` with a fixed zero-row-sum
//!   `Q₀`, a strictly positive rate modulation `μ`, and traceless `q(t)`;
//! * `Commuting` — `Q(t) = Σᵢ aᵢ(t)·Kᵢ + C_{q(t)}` with pairwise commuting
//!   constants `Kᵢ` and traceless `q(t)`.

use nalgebra::DMatrix;

use crate::dense;
use crate::timefn::{TimeFunction, VectorTimeFunction};
use crate::{Error, Result};

/// Tolerance for the traceless and zero-row-sum membership checks.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Tolerance on commutator norms for the commuting family.
pub const COMMUTATOR_TOL: f64 = 1e-12;

/// Sample count for validating `μ > 0` and `q(t)` tracelessness on a horizon.
pub const VALIDATION_SAMPLES: usize = 1000;

#[derive(Debug, Clone)]
pub struct EqualInputFamily {
    pub q: VectorTimeFunction,
}

#[derive(Debug, Clone)]
pub struct PerturbedFamily {
    pub mu: TimeFunction,
    pub q0: DMatrix<f64>,
    pub q: VectorTimeFunction,
}

#[derive(Debug, Clone)]
pub struct CommutingFamily {
    /// coefficient functions paired with constant zero-row-sum matrices
    pub terms: Vec<(TimeFunction, DMatrix<f64>)>,
    pub q: VectorTimeFunction,
}

#[derive(Debug, Clone)]
pub enum GeneratorFamily {
    EqualInput(EqualInputFamily),
    Perturbed(PerturbedFamily),
    Commuting(CommutingFamily),
}

impl GeneratorFamily {
    pub fn equal_input(q: VectorTimeFunction) -> Self {
        GeneratorFamily::EqualInput(EqualInputFamily { q })
    }

    pub fn perturbed(mu: TimeFunction, q0: DMatrix<f64>, q: VectorTimeFunction) -> Self {
        GeneratorFamily::Perturbed(PerturbedFamily { mu, q0, q })
    }

    pub fn commuting(terms: Vec<(TimeFunction, DMatrix<f64>)>, q: VectorTimeFunction) -> Self {
        GeneratorFamily::Commuting(CommutingFamily { terms, q })
    }

    pub fn dim(&self) -> usize {
        match self {
            GeneratorFamily::EqualInput(f) => f.q.dim(),
            GeneratorFamily::Perturbed(f) => f.q.dim(),
            GeneratorFamily::Commuting(f) => f.q.dim(),
        }
    }

    /// Dense generator `Q(t)`.
    pub fn eval_dense(&self, t: f64) -> DMatrix<f64> {
        self.eval_dense_in(t, t)
    }

    /// Dense generator with a piecewise selector for one-sided sampling.
    pub fn eval_dense_in(&self, t: f64, selector: f64) -> DMatrix<f64> {
        match self {
            GeneratorFamily::EqualInput(f) => dense_equal_input(&f.q.eval_raw_in(t, selector)),
            GeneratorFamily::Perturbed(f) => {
                let mu = f.mu.eval_in(t, selector);
                let row = f.q.eval_raw_in(t, selector);
                &f.q0 * mu + dense::equal_rows_from(&row)
            }
            GeneratorFamily::Commuting(f) => {
                let d = self.dim();
                let mut acc = DMatrix::zeros(d, d);
                for (coeff, k) in &f.terms {
                    acc += k * coeff.eval_in(t, selector);
                }
                acc + dense::equal_rows_from(&f.q.eval_raw_in(t, selector))
            }
        }
    }

    /// Trace of `Q(t)`; for equal-input values this is `−(d−1)·q(t)`.
    pub fn trace(&self, t: f64) -> f64 {
        self.trace_in(t, t)
    }

    pub fn trace_in(&self, t: f64, selector: f64) -> f64 {
        match self {
            GeneratorFamily::EqualInput(f) => {
                -(f.q.dim() as f64 - 1.0) * f.q.summatory_in(t, selector)
            }
            GeneratorFamily::Perturbed(f) => f.mu.eval_in(t, selector) * f.q0.trace(),
            GeneratorFamily::Commuting(f) => f
                .terms
                .iter()
                .map(|(coeff, k)| coeff.eval_in(t, selector) * k.trace())
                .sum(),
        }
    }

    /// True when every `Q(t)` on the sampled horizon is a rate matrix.
    pub fn is_rate_family(&self, horizon: f64) -> bool {
        let samples = VALIDATION_SAMPLES;
        (0..=samples).all(|i| {
            let t = horizon * i as f64 / samples as f64;
            let q = self.eval_dense(t);
            (0..q.nrows()).all(|r| {
                (0..q.ncols()).all(|c| r == c || q[(r, c)] >= -crate::algebra::PREDICATE_TOL)
            })
        })
    }

    /// Breakpoints of all involved time functions within `(0, horizon)`.
    pub fn breakpoints_within(&self, horizon: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            GeneratorFamily::EqualInput(f) => out.extend(f.q.breakpoints_within(horizon)),
            GeneratorFamily::Perturbed(f) => {
                f.mu.breakpoints_within(horizon, &mut out);
                out.extend(f.q.breakpoints_within(horizon));
            }
            GeneratorFamily::Commuting(f) => {
                for (coeff, _) in &f.terms {
                    coeff.breakpoints_within(horizon, &mut out);
                }
                out.extend(f.q.breakpoints_within(horizon));
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }

    /// Enforces the family invariants on `[0, horizon]`: dimension
    /// consistency, strict positivity of `μ`, tracelessness of `q(t)` for
    /// the perturbed and commuting kinds, zero row sums of the constants,
    /// and pairwise commutation for the commuting kind.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        let d = self.dim();
        match self {
            GeneratorFamily::EqualInput(f) => {
                for c in &f.q.components {
                    c.validate()?;
                }
            }
            GeneratorFamily::Perturbed(f) => {
                f.mu.validate()?;
                for c in &f.q.components {
                    c.validate()?;
                }
                if f.q0.nrows() != d || f.q0.ncols() != d {
                    return Err(Error::DimensionMismatch {
                        left: f.q0.nrows(),
                        right: d,
                    });
                }
                dense::check_zero_row_sums(&f.q0, MEMBERSHIP_TOL)
                    .map_err(|e| e.context("perturbed family Q0"))?;
                check_mu_positive(&f.mu, horizon)?;
                check_traceless(&f.q, horizon)?;
            }
            GeneratorFamily::Commuting(f) => {
                for (coeff, k) in &f.terms {
                    coeff.validate()?;
                    if k.nrows() != d || k.ncols() != d {
                        return Err(Error::DimensionMismatch {
                            left: k.nrows(),
                            right: d,
                        });
                    }
                    dense::check_zero_row_sums(k, MEMBERSHIP_TOL)
                        .map_err(|e| e.context("commuting family constant"))?;
                }
                for c in &f.q.components {
                    c.validate()?;
                }
                check_traceless(&f.q, horizon)?;
                for i in 0..f.terms.len() {
                    for j in (i + 1)..f.terms.len() {
                        let norm = dense::max_abs(&dense::commutator(&f.terms[i].1, &f.terms[j].1));
                        if norm > COMMUTATOR_TOL {
                            return Err(Error::NotCommuting { norm, i, j });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Dense `Q_x = −x·I + C_x` straight from raw parameter values.
fn dense_equal_input(params: &[f64]) -> DMatrix<f64> {
    let d = params.len();
    let x: f64 = params.iter().sum();
    DMatrix::from_fn(d, d, |i, j| if i == j { params[j] - x } else { params[j] })
}

// Sampled over (0, horizon]: the flow only integrates μ, so a zero exactly
// at the initial instant is harmless, and the first violating sample lands
// where μ actually crosses.
fn check_mu_positive(mu: &TimeFunction, horizon: f64) -> Result<()> {
    for i in 1..=VALIDATION_SAMPLES {
        let t = horizon * i as f64 / VALIDATION_SAMPLES as f64;
        let v = mu.eval(t);
        if v.is_nan() || v <= 0.0 {
            return Err(Error::InvalidFamily(format!(
                "μ must be strictly positive; μ({t}) = {v}"
            )));
        }
    }
    Ok(())
}

fn check_traceless(q: &VectorTimeFunction, horizon: f64) -> Result<()> {
    for i in 0..=VALIDATION_SAMPLES {
        let t = horizon * i as f64 / VALIDATION_SAMPLES as f64;
        let s = q.summatory(t);
        if s.abs() > MEMBERSHIP_TOL {
            return Err(Error::InvalidFamily(format!(
                "q(t) must be traceless; summatory at t = {t} is {s:e}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timefn::TimeFunction as TF;

    fn traceless_pair() -> VectorTimeFunction {
        VectorTimeFunction::new(vec![
            TF::Sinusoid {
                a: 0.2,
                omega: 1.0,
                phi: 0.0,
                offset: 0.0,
            },
            TF::Sinusoid {
                a: -0.2,
                omega: 1.0,
                phi: 0.0,
                offset: 0.0,
            },
        ])
        .unwrap()
    }

    #[test]
    fn perturbed_rejects_sign_changing_mu() {
        let mu = TF::Sinusoid {
            a: 1.0,
            omega: 1.0,
            phi: 0.0,
            offset: 0.0,
        };
        let q0 = crate::rng::Lcg::new(1).rate_matrix(2, 1.0);
        let fam = GeneratorFamily::perturbed(mu, q0, traceless_pair());
        let err = fam.validate(4.0).unwrap_err();
        assert!(matches!(err, Error::InvalidFamily(_)), "{err}");
        // the reported sample should sit near the zero of sin t
        let msg = err.to_string();
        assert!(msg.contains("μ"), "{msg}");
    }

    #[test]
    fn perturbed_rejects_traced_q() {
        let mu = TF::constant(1.0);
        let q0 = crate::rng::Lcg::new(1).rate_matrix(2, 1.0);
        let q = VectorTimeFunction::new(vec![TF::constant(0.3), TF::constant(0.0)]).unwrap();
        let fam = GeneratorFamily::perturbed(mu, q0, q);
        assert!(matches!(fam.validate(1.0), Err(Error::InvalidFamily(_))));
    }

    #[test]
    fn commuting_rejects_non_commuting_constants() {
        let k1 = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.5, -0.5]);
        let k2 = DMatrix::from_row_slice(2, 2, &[-2.0, 2.0, 3.0, -3.0]);
        let fam = GeneratorFamily::commuting(
            vec![(TF::constant(1.0), k1), (TF::constant(1.0), k2)],
            traceless_pair(),
        );
        match fam.validate(1.0) {
            Err(Error::NotCommuting { norm, .. }) => assert!(norm > 1e-12),
            other => panic!("expected NotCommuting, got {other:?}"),
        }
    }

    #[test]
    fn powers_of_one_matrix_commute() {
        let k = crate::rng::Lcg::new(3).rate_matrix(4, 1.0);
        let k2 = &k * &k;
        let fam = GeneratorFamily::commuting(
            vec![(TF::constant(1.0), k), (TF::constant(0.5), k2)],
            VectorTimeFunction::new(vec![
                TF::constant(0.0),
                TF::constant(0.0),
                TF::constant(0.0),
                TF::constant(0.0),
            ])
            .unwrap(),
        );
        fam.validate(2.0).unwrap();
    }

    #[test]
    fn dense_evaluation_matches_structure() {
        let q = VectorTimeFunction::new(vec![TF::constant(0.4), TF::constant(0.1)]).unwrap();
        let fam = GeneratorFamily::equal_input(q);
        let qd = fam.eval_dense(0.0);
        assert!((qd[(0, 0)] - (0.4 - 0.5)).abs() < 1e-15);
        assert!((qd[(0, 1)] - 0.1).abs() < 1e-15);
        assert!((fam.trace(0.0) - -0.5).abs() < 1e-15);
    }
}
