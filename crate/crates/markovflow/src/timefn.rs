//! Symbolic time-dependence specifications, exactly evaluable at any `t`.
//!
//! The JSON encoding uses tagged objects, e.g.
//! `{"kind":"sinusoid","a":0.5,"omega":1.0,"phi":0.0,"offset":1.0}` for
//! `1 + 0.5·sin t`. Piecewise specifications evaluate their sub-functions at
//! absolute time; breakpoints must be strictly increasing and become exact
//! quadrature partition boundaries downstream.

use serde::{Deserialize, Serialize};

use crate::algebra::ParamVector;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeFunction {
    /// `c`
    Constant { c: f64 },
    /// `Σ coeffs[k]·tᵏ`
    Polynomial { coeffs: Vec<f64> },
    /// `a·e^{k t}`
    Exponential { a: f64, k: f64 },
    /// `offset + a·sin(ω t + φ)`
    Sinusoid {
        a: f64,
        omega: f64,
        #[serde(default)]
        phi: f64,
        #[serde(default)]
        offset: f64,
    },
    /// piece `i` applies on `[breakpoints[i−1], breakpoints[i])`, the first
    /// piece on `[0, breakpoints[0])`, the last on `[breakpoints.last(), ∞)`
    Piecewise {
        breakpoints: Vec<f64>,
        pieces: Vec<TimeFunction>,
    },
}

impl TimeFunction {
    pub fn constant(c: f64) -> Self {
        TimeFunction::Constant { c }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TimeFunction::Constant { c } => finite(*c, "constant"),
            TimeFunction::Polynomial { coeffs } => {
                for &c in coeffs {
                    finite(c, "polynomial coefficient")?;
                }
                Ok(())
            }
            TimeFunction::Exponential { a, k } => {
                finite(*a, "exponential amplitude")?;
                finite(*k, "exponential rate")
            }
            TimeFunction::Sinusoid {
                a,
                omega,
                phi,
                offset,
            } => {
                finite(*a, "sinusoid amplitude")?;
                finite(*omega, "sinusoid frequency")?;
                finite(*phi, "sinusoid phase")?;
                finite(*offset, "sinusoid offset")
            }
            TimeFunction::Piecewise {
                breakpoints,
                pieces,
            } => {
                if pieces.len() != breakpoints.len() + 1 {
                    return Err(Error::InvalidFamily(format!(
                        "piecewise needs breakpoints.len()+1 pieces, got {} breakpoints and {} pieces",
                        breakpoints.len(),
                        pieces.len()
                    )));
                }
                if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidFamily(
                        "piecewise breakpoints must be strictly increasing".into(),
                    ));
                }
                for p in pieces {
                    p.validate()?;
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_in(t, t)
    }

    /// Evaluates at `t`, choosing the piece of any piecewise level by the
    /// `selector` time. Quadrature samples one-sided limits at segment
    /// boundaries this way: the selector lies strictly inside the segment.
    pub fn eval_in(&self, t: f64, selector: f64) -> f64 {
        match self {
            TimeFunction::Constant { c } => *c,
            TimeFunction::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for &c in coeffs.iter().rev() {
                    acc = acc * t + c;
                }
                acc
            }
            TimeFunction::Exponential { a, k } => a * (k * t).exp(),
            TimeFunction::Sinusoid {
                a,
                omega,
                phi,
                offset,
            } => offset + a * (omega * t + phi).sin(),
            TimeFunction::Piecewise {
                breakpoints,
                pieces,
            } => {
                let idx = breakpoints.partition_point(|&b| b <= selector);
                pieces[idx].eval_in(t, selector)
            }
        }
    }

    /// Breakpoints lying strictly inside `(0, horizon)`; these must become
    /// quadrature partition boundaries.
    pub fn breakpoints_within(&self, horizon: f64, out: &mut Vec<f64>) {
        if let TimeFunction::Piecewise {
            breakpoints,
            pieces,
        } = self
        {
            for &b in breakpoints {
                if b > 0.0 && b < horizon {
                    out.push(b);
                }
            }
            for p in pieces {
                p.breakpoints_within(horizon, out);
            }
        }
    }
}

/// A vector of `d` time functions; evaluation yields a [`ParamVector`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorTimeFunction {
    pub components: Vec<TimeFunction>,
}

impl VectorTimeFunction {
    pub fn new(components: Vec<TimeFunction>) -> Result<Self> {
        if components.len() < 2 {
            return Err(Error::DimensionMismatch {
                left: components.len(),
                right: 2,
            });
        }
        for c in &components {
            c.validate()?;
        }
        Ok(Self { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, t: f64) -> ParamVector {
        ParamVector::new(self.eval_raw(t)).expect("dimension ≥ 2 checked at construction")
    }

    /// Raw component values, avoiding the `ParamVector` validation cost in
    /// quadrature inner loops.
    pub fn eval_raw(&self, t: f64) -> Vec<f64> {
        self.eval_raw_in(t, t)
    }

    /// Component values with a piecewise selector, for one-sided sampling.
    pub fn eval_raw_in(&self, t: f64, selector: f64) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.eval_in(t, selector))
            .collect()
    }

    pub fn summatory(&self, t: f64) -> f64 {
        self.summatory_in(t, t)
    }

    pub fn summatory_in(&self, t: f64, selector: f64) -> f64 {
        self.components.iter().map(|c| c.eval_in(t, selector)).sum()
    }

    pub fn breakpoints_within(&self, horizon: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for c in &self.components {
            c.breakpoints_within(horizon, &mut out);
        }
        out
    }
}

fn finite(x: f64, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteInput(format!("{what}: {x}")))
    }
}
