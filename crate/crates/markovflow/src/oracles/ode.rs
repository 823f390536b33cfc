//! Runge–Kutta reference solutions of `Ṁ = M·Q(t)`, `M(0) = I`.
//!
//! Two methods: classic fixed-step RK4 and adaptive Dormand–Prince 5(4)
//! with an embedded error estimate. Breakpoints of piecewise families and
//! requested output times are forced step boundaries.

use nalgebra::DMatrix;

use crate::family::GeneratorFamily;
use crate::quad::merge_breaks;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub enum ODEMethod {
    /// classic RK4 with the given step size
    Rk4Fixed { step: f64 },
    /// Dormand–Prince 5(4) with per-step tolerances
    Rk45Adaptive { rtol: f64, atol: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct ODEConfig {
    pub method: ODEMethod,
}

impl ODEConfig {
    pub fn rk4(step: f64) -> Self {
        Self {
            method: ODEMethod::Rk4Fixed { step },
        }
    }

    pub fn rk45(rtol: f64, atol: f64) -> Self {
        Self {
            method: ODEMethod::Rk45Adaptive { rtol, atol },
        }
    }
}

impl Default for ODEConfig {
    fn default() -> Self {
        Self::rk45(1e-10, 1e-12)
    }
}

/// Solves up to time `t`, returning `M(t)`.
pub fn ode_solve(family: &GeneratorFamily, t: f64, cfg: ODEConfig) -> Result<DMatrix<f64>> {
    if t == 0.0 {
        let d = family.dim();
        return Ok(DMatrix::identity(d, d));
    }
    Ok(ode_solve_grid(family, &[0.0, t], cfg)?.pop().unwrap())
}

/// Solves along an increasing grid starting at 0, returning `M` at every
/// grid point. Grid points and family breakpoints are step boundaries.
pub fn ode_solve_grid(
    family: &GeneratorFamily,
    grid: &[f64],
    cfg: ODEConfig,
) -> Result<Vec<DMatrix<f64>>> {
    if grid.is_empty() || grid[0] != 0.0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid(
            "ODE grid must start at 0 and be strictly increasing".into(),
        ));
    }
    match cfg.method {
        ODEMethod::Rk4Fixed { step } if !(step > 0.0 && step.is_finite()) => {
            return Err(Error::InvalidGrid(format!(
                "RK4 step must be positive, got {step}"
            )));
        }
        ODEMethod::Rk45Adaptive { rtol, atol }
            if !(rtol > 0.0 && atol > 0.0 && rtol.is_finite() && atol.is_finite()) =>
        {
            return Err(Error::InvalidGrid(format!(
                "adaptive tolerances must be positive, got rtol {rtol}, atol {atol}"
            )));
        }
        _ => {}
    }
    let d = family.dim();
    let horizon = *grid.last().unwrap();
    let stops = merge_breaks(grid, &family.breakpoints_within(horizon));

    let mut m = DMatrix::<f64>::identity(d, d);
    let mut out = Vec::with_capacity(grid.len());
    out.push(m.clone());
    let mut next_grid = 1;

    for w in stops.windows(2) {
        let (a, b) = (w[0], w[1]);
        m = match cfg.method {
            ODEMethod::Rk4Fixed { step } => rk4_segment(family, m, a, b, step)?,
            ODEMethod::Rk45Adaptive { rtol, atol } => dp45_segment(family, m, a, b, rtol, atol)?,
        };
        while next_grid < grid.len() && grid[next_grid] <= b {
            out.push(m.clone());
            next_grid += 1;
        }
    }
    while next_grid < grid.len() {
        out.push(m.clone());
        next_grid += 1;
    }
    Ok(out)
}

/// Derivative with the piece selector pinned to the interior of the current
/// smooth segment, so evaluations at segment boundaries take the one-sided
/// limit belonging to the segment being integrated.
fn derivative(family: &GeneratorFamily, t: f64, selector: f64, m: &DMatrix<f64>) -> DMatrix<f64> {
    m * family.eval_dense_in(t, selector)
}

fn rk4_segment(
    family: &GeneratorFamily,
    mut m: DMatrix<f64>,
    a: f64,
    b: f64,
    step: f64,
) -> Result<DMatrix<f64>> {
    if step.is_nan() || step <= 0.0 {
        return Err(Error::StepUnderflow { t: a, h: step });
    }
    let sel = 0.5 * (a + b);
    let n = ((b - a) / step).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    let mut t = a;
    for _ in 0..n {
        let k1 = derivative(family, t, sel, &m);
        let k2 = derivative(family, t + 0.5 * h, sel, &(&m + &k1 * (0.5 * h)));
        let k3 = derivative(family, t + 0.5 * h, sel, &(&m + &k2 * (0.5 * h)));
        let k4 = derivative(family, t + h, sel, &(&m + &k3 * h));
        m += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t += h;
    }
    Ok(m)
}

// Dormand–Prince 5(4) coefficients.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b⁽⁵⁾ − b⁽⁴⁾, the embedded error weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn dp45_segment(
    family: &GeneratorFamily,
    mut m: DMatrix<f64>,
    a: f64,
    b: f64,
    rtol: f64,
    atol: f64,
) -> Result<DMatrix<f64>> {
    let sel = 0.5 * (a + b);
    let mut t = a;
    let mut h = (b - a) / 16.0;
    let mut k1 = derivative(family, t, sel, &m);
    while t < b {
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, h });
        }
        let last = t + h >= b;
        if last {
            h = b - t;
        }
        let k2 = derivative(family, t + 0.2 * h, sel, &(&m + &k1 * (A21 * h)));
        let k3 = derivative(
            family,
            t + 0.3 * h,
            sel,
            &(&m + &k1 * (A31 * h) + &k2 * (A32 * h)),
        );
        let k4 = derivative(
            family,
            t + 0.8 * h,
            sel,
            &(&m + &k1 * (A41 * h) + &k2 * (A42 * h) + &k3 * (A43 * h)),
        );
        let k5 = derivative(
            family,
            t + 8.0 / 9.0 * h,
            sel,
            &(&m + &k1 * (A51 * h) + &k2 * (A52 * h) + &k3 * (A53 * h) + &k4 * (A54 * h)),
        );
        let y_mid = &m
            + &k1 * (A61 * h)
            + &k2 * (A62 * h)
            + &k3 * (A63 * h)
            + &k4 * (A64 * h)
            + &k5 * (A65 * h);
        let k6 = derivative(family, t + h, sel, &y_mid);
        let y_new = &m + (&k1 * B1 + &k3 * B3 + &k4 * B4 + &k5 * B5 + &k6 * B6) * h;
        let k7 = derivative(family, t + h, sel, &y_new);
        let err_matrix = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;

        let mut err_norm = 0.0_f64;
        for (e, (y0, y1)) in err_matrix.iter().zip(m.iter().zip(y_new.iter())) {
            let scale = atol + rtol * y0.abs().max(y1.abs());
            err_norm += (e / scale) * (e / scale);
        }
        err_norm = (err_norm / err_matrix.len() as f64).sqrt();

        if err_norm <= 1.0 {
            t += h;
            m = y_new;
            k1 = k7; // first-same-as-last
        }
        let factor = if err_norm == 0.0 {
            5.0
        } else {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::max_abs_diff;
    use crate::family::GeneratorFamily;
    use crate::oracles::dense_expm;
    use crate::timefn::{TimeFunction, VectorTimeFunction};

    fn constant_family(params: &[f64]) -> GeneratorFamily {
        GeneratorFamily::equal_input(
            VectorTimeFunction::new(params.iter().map(|&c| TimeFunction::constant(c)).collect())
                .unwrap(),
        )
    }

    #[test]
    fn constant_generator_reproduces_exponential() {
        let fam = constant_family(&[0.4, 0.1, 0.25]);
        let q = fam.eval_dense(0.0);
        let adaptive = ode_solve(&fam, 1.0, ODEConfig::rk45(1e-10, 1e-12)).unwrap();
        assert!(max_abs_diff(&adaptive, &dense_expm(&q)) <= 1e-10);
    }

    #[test]
    fn scalar_modulated_generator_matches_commuting_closed_form() {
        // Q(t) = μ(t)·Q₀ with μ(t) = 1 + t: M(t) = exp(u(t)·Q₀), u = t + t²/2.
        let mut rng = crate::rng::Lcg::new(5);
        let q0 = rng.rate_matrix(3, 1.0);
        let q = VectorTimeFunction::new(vec![
            TimeFunction::constant(0.0),
            TimeFunction::constant(0.0),
            TimeFunction::constant(0.0),
        ])
        .unwrap();
        let fam = GeneratorFamily::perturbed(
            TimeFunction::Polynomial {
                coeffs: vec![1.0, 1.0],
            },
            q0.clone(),
            q,
        );
        let t = 0.8;
        let u = t + t * t / 2.0;
        let expect = dense_expm(&(&q0 * u));
        let got = ode_solve(&fam, t, ODEConfig::rk45(1e-11, 1e-13)).unwrap();
        assert!(max_abs_diff(&got, &expect) <= 1e-9);
    }

    #[test]
    fn rk4_shows_fourth_order_convergence() {
        let fam = constant_family(&[0.5, 0.3]);
        let exact = dense_expm(&fam.eval_dense(0.0));
        let err = |step: f64| {
            let m = ode_solve(&fam, 1.0, ODEConfig::rk4(step)).unwrap();
            max_abs_diff(&m, &exact)
        };
        let e1 = err(0.1);
        let e2 = err(0.05);
        let ratio = e1 / e2;
        assert!(
            (10.0..26.0).contains(&ratio),
            "expected ~16x error reduction, got {ratio}"
        );
    }

    #[test]
    fn grid_output_is_consistent_with_single_shots() {
        let fam = constant_family(&[0.2, 0.1]);
        let grid = [0.0, 0.5, 1.0, 2.0];
        let on_grid = ode_solve_grid(&fam, &grid, ODEConfig::default()).unwrap();
        assert!(max_abs_diff(&on_grid[0], &DMatrix::identity(2, 2)) < 1e-15);
        for (i, &t) in grid.iter().enumerate().skip(1) {
            let single = ode_solve(&fam, t, ODEConfig::default()).unwrap();
            assert!(max_abs_diff(&on_grid[i], &single) <= 1e-9);
        }
    }
}
