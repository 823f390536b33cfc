//! Quadrature kernels.
//!
//! Two engines cover all integration in the crate:
//!
//! * [`cumulative_simpson`] on a [`Partition`] — composite Simpson over a
//!   shared refined grid, returning the running integral at *every* node.
//!   Nested integrals (an integrand depending on the cumulative integral of
//!   another function) evaluate all stages on the same partition, and
//!   [`converge_on_partition`] doubles the panel count until successive
//!   refinements agree. Breakpoints of piecewise data are partition
//!   boundaries, so every panel sees a smooth integrand.
//! * [`try_adaptive_simpson`] — recursive adaptive Simpson with Richardson
//!   correction, for one-shot integrals whose integrands have localised
//!   sharp features (the principal-logarithm integral).

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Values a quadrature rule can accumulate: scalars, coefficient vectors,
/// dense matrices.
pub trait QuadValue: Clone {
    fn zero_like(&self) -> Self;
    /// `self += c·other`
    fn add_scaled(&mut self, c: f64, other: &Self);
    fn max_abs_val(&self) -> f64;

    fn combine(parts: &[(f64, &Self)]) -> Self {
        let mut acc = parts[0].1.zero_like();
        for (c, v) in parts {
            acc.add_scaled(*c, v);
        }
        acc
    }
}

impl QuadValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, c: f64, other: &Self) {
        *self += c * other;
    }
    fn max_abs_val(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Vec<f64> {
    fn zero_like(&self) -> Self {
        vec![0.0; self.len()]
    }
    fn add_scaled(&mut self, c: f64, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += c * b;
        }
    }
    fn max_abs_val(&self) -> f64 {
        self.iter().fold(0.0_f64, |a, &x| a.max(x.abs()))
    }
}

impl QuadValue for DMatrix<f64> {
    fn zero_like(&self) -> Self {
        DMatrix::zeros(self.nrows(), self.ncols())
    }
    fn add_scaled(&mut self, c: f64, other: &Self) {
        *self += other * c;
    }
    fn max_abs_val(&self) -> f64 {
        crate::dense::max_abs(self)
    }
}

/// A quadrature grid: strictly increasing break values, each segment split
/// into the same even number of equal panels.
///
/// Segment boundary nodes are *duplicated* — the end of one segment and the
/// start of the next are distinct sample slots at the same time value — so
/// integrands with jumps exactly at the breaks are sampled with one-sided
/// values on each side. Each node carries a `selector` time strictly inside
/// its segment; piecewise functions must choose their piece by the selector
/// and evaluate at the node time.
#[derive(Debug, Clone)]
pub struct Partition {
    nodes: Vec<f64>,
    selectors: Vec<f64>,
    /// node index of the start of each segment, plus the final count
    seg_bounds: Vec<usize>,
}

impl Partition {
    /// `breaks` must be strictly increasing with at least two entries;
    /// `panels` must be even and ≥ 2.
    pub fn build(breaks: &[f64], panels: usize) -> Self {
        assert!(breaks.len() >= 2, "need at least one segment");
        assert!(
            panels >= 2 && panels.is_multiple_of(2),
            "panel count must be even"
        );
        let nodes_per_segment = panels + 1;
        let segment_count = breaks.len() - 1;
        let mut nodes = Vec::with_capacity(segment_count * nodes_per_segment);
        let mut selectors = Vec::with_capacity(nodes.capacity());
        let mut seg_bounds = Vec::with_capacity(breaks.len());
        for w in breaks.windows(2) {
            seg_bounds.push(nodes.len());
            let (a, b) = (w[0], w[1]);
            let h = (b - a) / panels as f64;
            let mid = 0.5 * (a + b);
            for k in 0..=panels {
                let t = if k == panels { b } else { a + h * k as f64 };
                nodes.push(t);
                selectors.push(if k == 0 {
                    mid.min(t + 0.25 * h)
                } else if k == panels {
                    mid.max(t - 0.25 * h)
                } else {
                    t
                });
            }
        }
        seg_bounds.push(nodes.len());
        Self {
            nodes,
            selectors,
            seg_bounds,
        }
    }

    /// Node times, including the duplicated segment boundaries.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Per-node piece-selector times (strictly inside each node's segment).
    pub fn selectors(&self) -> &[f64] {
        &self.selectors
    }

    /// Samples a function at every node; piecewise-discontinuous functions
    /// receive `(node time, selector time)`.
    pub fn sample<T>(&self, eval: impl Fn(f64, f64) -> T) -> Vec<T> {
        self.nodes
            .iter()
            .zip(&self.selectors)
            .map(|(&t, &s)| eval(t, s))
            .collect()
    }

    /// Index of the node ending the segment whose right boundary equals `t`,
    /// or the very first node when `t` is the partition start.
    pub fn index_of_break(&self, t: f64) -> Option<usize> {
        if t == self.nodes[0] {
            return Some(0);
        }
        self.seg_bounds
            .windows(2)
            .map(|w| w[1] - 1)
            .find(|&i| self.nodes[i] == t)
    }

    fn segments(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.seg_bounds.windows(2).map(|w| (w[0], w[1] - 1))
    }
}

/// Running integral `F(tᵢ) = ∫_{t₀}^{tᵢ} f` at every node of the partition,
/// from samples of the integrand at the nodes.
///
/// Within each uniform segment, even-offset nodes advance by the Simpson
/// pair rule and odd-offset nodes by the three-point half rule
/// `h/12·(5f₀ + 8f₁ − f₂)`; both are exact for quadratics, keeping the
/// cumulative values fourth-order accurate at every node. The running value
/// carries across the duplicated boundary nodes unchanged.
pub fn cumulative_simpson<T: QuadValue>(partition: &Partition, samples: &[T]) -> Vec<T> {
    let nodes = partition.nodes();
    assert_eq!(nodes.len(), samples.len());
    let mut out: Vec<T> = Vec::with_capacity(nodes.len());
    for (start, end) in partition.segments() {
        if out.is_empty() {
            out.push(samples[0].zero_like());
        } else {
            // duplicated boundary node: integral value continues
            let prev = out.last().unwrap().clone();
            out.push(prev);
        }
        let panels = end - start;
        let h = (nodes[end] - nodes[start]) / panels as f64;
        let mut k = start;
        while k + 2 <= end {
            // odd node: half rule from k
            let mut half = out[k].clone();
            half.add_scaled(5.0 * h / 12.0, &samples[k]);
            half.add_scaled(8.0 * h / 12.0, &samples[k + 1]);
            half.add_scaled(-h / 12.0, &samples[k + 2]);
            out.push(half);
            // even node: Simpson pair from k
            let mut full = out[k].clone();
            full.add_scaled(h / 3.0, &samples[k]);
            full.add_scaled(4.0 * h / 3.0, &samples[k + 1]);
            full.add_scaled(h / 3.0, &samples[k + 2]);
            out.push(full);
            k += 2;
        }
    }
    out
}

/// Result of a converged panel-doubling computation.
#[derive(Debug, Clone)]
pub struct Converged<T> {
    pub values: Vec<T>,
    /// max-abs difference between the last two refinements
    pub error_estimate: f64,
    /// the final exponent k, with 2^k panels per segment
    pub refinements: u32,
}

/// Doubling cap: panels per segment go up to 2^20.
pub const MAX_DOUBLINGS: u32 = 20;

/// Node-count guard across all segments; quadratures needing more are
/// reported as nonconverged rather than exhausting memory.
pub const MAX_TOTAL_NODES: usize = 4_000_000;

/// Evaluates `eval` on partitions of `breaks` with `2^k` panels per segment,
/// doubling `k` until two successive results agree within `tol` relative to
/// `max(1, ‖values‖)`.
///
/// A `SeriesNotConverged` from `eval` is treated as under-resolution — a
/// truncated series inside the integrand can stall on a grid too coarse for
/// its iterated integrals — and triggers the next refinement; any other
/// error aborts immediately.
pub fn converge_on_partition<T: QuadValue>(
    breaks: &[f64],
    tol: f64,
    eval: impl Fn(&Partition) -> Result<Vec<T>>,
) -> Result<Converged<T>> {
    let mut k: u32 = 3;
    let mut previous: Option<Vec<T>> = None;
    let mut last_diff = f64::INFINITY;
    let mut last_series_error = None;
    while k <= MAX_DOUBLINGS {
        let panels = 1usize << k;
        if (breaks.len() - 1) * (panels + 1) > MAX_TOTAL_NODES {
            break;
        }
        let partition = Partition::build(breaks, panels);
        let values = match eval(&partition) {
            Ok(v) => v,
            Err(e @ Error::SeriesNotConverged { .. }) => {
                last_series_error = Some(e);
                previous = None;
                k += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        last_series_error = None;
        if let Some(prev) = &previous {
            let mut diff = 0.0_f64;
            let mut scale = 1.0_f64;
            for (a, b) in values.iter().zip(prev) {
                let mut delta = a.clone();
                delta.add_scaled(-1.0, b);
                diff = diff.max(delta.max_abs_val());
                scale = scale.max(a.max_abs_val());
            }
            last_diff = diff;
            if diff <= tol * scale.max(1.0) {
                return Ok(Converged {
                    values,
                    error_estimate: diff,
                    refinements: k,
                });
            }
        }
        previous = Some(values);
        k += 1;
    }
    if let Some(e) = last_series_error {
        return Err(e);
    }
    Err(Error::QuadratureNotConverged {
        tol,
        achieved: last_diff,
        refinements: MAX_DOUBLINGS,
    })
}

/// Sorted, deduplicated union of grid points and breakpoints, for use as
/// partition breaks.
pub fn merge_breaks(grid: &[f64], extra: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = grid.iter().chain(extra.iter()).copied().collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup_by(|a, b| (*a - *b).abs() <= f64::EPSILON * a.abs().max(1.0));
    all
}

/// Adaptive Simpson with Richardson correction for a fallible integrand.
/// `tol` is the absolute error budget for the whole interval.
pub fn try_adaptive_simpson<T: QuadValue>(
    f: impl Fn(f64) -> Result<T>,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<T> {
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = simpson_rule(a, b, &fa, &fm, &fb);
    adaptive_step(&f, a, fa, b, fb, m, fm, whole, tol, max_depth)
}

/// Adaptive Simpson for an infallible integrand.
pub fn adaptive_simpson<T: QuadValue>(
    f: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<T> {
    try_adaptive_simpson(|t| Ok(f(t)), a, b, tol, max_depth)
}

fn simpson_rule<T: QuadValue>(a: f64, b: f64, fa: &T, fm: &T, fb: &T) -> T {
    let h = (b - a) / 6.0;
    T::combine(&[(h, fa), (4.0 * h, fm), (h, fb)])
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<T: QuadValue>(
    f: &impl Fn(f64) -> Result<T>,
    a: f64,
    fa: T,
    b: f64,
    fb: T,
    m: f64,
    fm: T,
    whole: T,
    eps: f64,
    depth: u32,
) -> Result<T> {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = simpson_rule(a, m, &fa, &flm, &fm);
    let right = simpson_rule(m, b, &fm, &frm, &fb);
    let mut combined = left.clone();
    combined.add_scaled(1.0, &right);
    let mut delta = combined.clone();
    delta.add_scaled(-1.0, &whole);
    let err = delta.max_abs_val();
    if err <= 15.0 * eps {
        combined.add_scaled(1.0 / 15.0, &delta);
        return Ok(combined);
    }
    if depth == 0 {
        return Err(Error::QuadratureNotConverged {
            tol: eps,
            achieved: err / 15.0,
            refinements: 0,
        });
    }
    let mut total = adaptive_step(f, a, fa, m, fm.clone(), lm, flm, left, 0.5 * eps, depth - 1)?;
    let rhs = adaptive_step(f, m, fm, b, fb, rm, frm, right, 0.5 * eps, depth - 1)?;
    total.add_scaled(1.0, &rhs);
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_simpson_is_exact_for_cubics() {
        // ∫₀ᵗ v³ dv = t⁴/4 — Simpson and the half rule are exact to rounding
        // for quadratics; cubics test the pair rule's symmetric cancellation.
        let partition = Partition::build(&[0.0, 1.0, 2.5], 8);
        let samples: Vec<f64> = partition.nodes().iter().map(|&v| v * v).collect();
        let cumulative = cumulative_simpson(&partition, &samples);
        for (node, val) in partition.nodes().iter().zip(&cumulative) {
            let exact = node.powi(3) / 3.0;
            assert!(
                (val - exact).abs() <= 1e-14 * exact.max(1.0),
                "at t={node}: {val} vs {exact}"
            );
        }
    }

    #[test]
    fn cumulative_simpson_converges_fourth_order() {
        let breaks = [0.0, 2.0];
        let run = |panels: usize| -> f64 {
            let p = Partition::build(&breaks, panels);
            let samples: Vec<f64> = p.nodes().iter().map(|&v| (3.0 * v).sin()).collect();
            let c = cumulative_simpson(&p, &samples);
            let exact = (1.0 - (6.0_f64).cos()) / 3.0;
            (c.last().unwrap() - exact).abs()
        };
        let e1 = run(16);
        let e2 = run(32);
        assert!(e1 / e2 > 10.0, "expected ~16x reduction, got {}", e1 / e2);
    }

    #[test]
    fn converge_on_partition_meets_tolerance() {
        let breaks = [0.0, 3.0];
        let result = converge_on_partition(&breaks, 1e-12, |p| {
            let samples: Vec<f64> = p.nodes().iter().map(|&v| (-v).exp()).collect();
            Ok(cumulative_simpson(p, &samples)
                .last()
                .cloned()
                .into_iter()
                .collect())
        })
        .unwrap();
        let exact = 1.0 - (-3.0_f64).exp();
        assert!((result.values[0] - exact).abs() < 1e-12);
    }

    #[test]
    fn adaptive_simpson_handles_boundary_layer() {
        // sharp but integrable feature near the right end
        let f = |t: f64| 1.0 / ((1.0 - t) + 1e-3);
        let exact = ((1.0 + 1e-3) / 1e-3_f64).ln();
        let got = adaptive_simpson(f, 0.0, 1.0, 1e-12, 60).unwrap();
        assert!((got - exact).abs() < 1e-10, "{got} vs {exact}");
    }

    #[test]
    fn adaptive_simpson_reports_nonconvergence() {
        // depth 0 cannot resolve the feature
        let f = |t: f64| 1.0 / ((1.0 - t) + 1e-6);
        assert!(matches!(
            adaptive_simpson(f, 0.0, 1.0, 1e-14, 0),
            Err(Error::QuadratureNotConverged { .. })
        ));
    }

    #[test]
    fn merge_breaks_dedups() {
        let merged = merge_breaks(&[0.0, 1.0, 2.0], &[1.0, 0.5]);
        assert_eq!(merged, vec![0.0, 0.5, 1.0, 2.0]);
    }

    #[test]
    fn matrix_valued_cumulative() {
        let partition = Partition::build(&[0.0, 1.0], 16);
        let samples: Vec<DMatrix<f64>> = partition
            .nodes()
            .iter()
            .map(|&t| DMatrix::from_row_slice(2, 2, &[t, 1.0, 0.0, t * t]))
            .collect();
        let c = cumulative_simpson(&partition, &samples);
        let last = c.last().unwrap();
        assert!((last[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((last[(0, 1)] - 1.0).abs() < 1e-14);
        assert!((last[(1, 1)] - 1.0 / 3.0).abs() < 1e-14);
    }
}
