//! Peano–Baker series solver: `M(t) = Σₙ Iₙ(t)` with `I₀ = I` and
//! `Iₙ₊₁(t) = ∫₀ᵗ Iₙ(τ)·Q(τ) dτ`, every iterate computed by cumulative
//! Simpson on one shared refined grid.

use nalgebra::DMatrix;
use std::cell::RefCell;

use crate::family::GeneratorFamily;
use crate::quad::{self, cumulative_simpson};
use crate::{dense, Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct PBSConfig {
    /// sup-norm threshold on the last series term
    pub tol: f64,
    pub max_terms: usize,
}

impl Default for PBSConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_terms: 60,
        }
    }
}

impl PBSConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "PBS tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_terms < 3 {
            return Err(Error::InvalidGrid(format!(
                "PBS needs max_terms ≥ 3, got {}",
                self.max_terms
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PbsSolution {
    pub m: DMatrix<f64>,
    /// the series terms `I₁(t), I₂(t), …` at the requested time
    pub terms: Vec<DMatrix<f64>>,
    /// number of terms summed (truncation order)
    pub order: usize,
}

/// Solves the Cauchy problem at time `t` by the Peano–Baker series.
pub fn pbs_solve(family: &GeneratorFamily, t: f64, cfg: PBSConfig) -> Result<PbsSolution> {
    cfg.validate()?;
    let d = family.dim();
    if t < 0.0 {
        return Err(Error::InvalidGrid(format!("PBS needs t ≥ 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(PbsSolution {
            m: DMatrix::identity(d, d),
            terms: Vec::new(),
            order: 0,
        });
    }
    let breaks = quad::merge_breaks(&[0.0, t], &family.breakpoints_within(t));
    let captured_terms: RefCell<Vec<DMatrix<f64>>> = RefCell::new(Vec::new());

    let converged = quad::converge_on_partition(&breaks, cfg.tol, |partition| {
        let nodes = partition.nodes();
        let end = nodes.len() - 1;
        let q_at: Vec<DMatrix<f64>> = partition.sample(|v, s| family.eval_dense_in(v, s));
        let mut current: Vec<DMatrix<f64>> =
            nodes.iter().map(|_| DMatrix::identity(d, d)).collect();
        let mut sum = DMatrix::<f64>::identity(d, d);
        let mut terms = Vec::new();
        for _ in 0..cfg.max_terms {
            let integrand: Vec<DMatrix<f64>> =
                current.iter().zip(&q_at).map(|(i_n, q)| i_n * q).collect();
            current = cumulative_simpson(partition, &integrand);
            let last = current[end].clone();
            let last_norm = dense::max_abs(&last);
            sum += &last;
            terms.push(last);
            if last_norm < cfg.tol {
                *captured_terms.borrow_mut() = terms;
                return Ok(vec![sum]);
            }
        }
        Err(Error::SeriesNotConverged {
            tol: cfg.tol,
            max_terms: cfg.max_terms,
            last: dense::max_abs(&current[end]),
        })
    })?;

    let terms = captured_terms.into_inner();
    Ok(PbsSolution {
        m: converged.values.into_iter().next().unwrap(),
        order: terms.len(),
        terms,
    })
}
