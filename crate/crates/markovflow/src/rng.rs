//! Deterministic fixture generator.
//!
//! Every randomized fixture — in tests, in seeded scenario matrices, and in
//! any other implementation of the same file formats — derives from a 64-bit
//! seed through this exact linear-congruential recipe, so independent
//! implementations reproduce identical fixtures:
//!
//! ```text
//! state₀   = seed
//! stateₙ₊₁ = (6364136223846793005 · stateₙ + 1442695040888963407) mod 2⁶⁴
//! u        = (stateₙ₊₁ >> 11) / 2⁵³          (uniform draw in [0, 1))
//! ```
//!
//! Draws are consumed in documented order by the helper methods below.

/// Linear congruential generator with the MMIX multiplier.
#[derive(Debug, Clone)]
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.state = self
            .state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.state >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Vector of `d` uniform draws in `[lo, hi)`, consumed left to right.
    pub fn vector(&mut self, d: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..d).map(|_| self.uniform(lo, hi)).collect()
    }

    /// Vector of `d` uniform integer draws in `{lo, …, hi}`.
    pub fn int_vector(&mut self, d: usize, lo: i64, hi: i64) -> Vec<f64> {
        (0..d)
            .map(|_| {
                let span = (hi - lo + 1) as f64;
                lo as f64 + (self.next_f64() * span).floor().min(span - 1.0)
            })
            .collect()
    }

    /// Zero-sum vector: `d` uniform draws in `[−scale, scale)` with the mean
    /// subtracted.
    pub fn traceless_vector(&mut self, d: usize, scale: f64) -> Vec<f64> {
        let mut v = self.vector(d, -scale, scale);
        let mean = v.iter().sum::<f64>() / d as f64;
        for x in &mut v {
            *x -= mean;
        }
        v
    }

    /// Dense `d×d` rate matrix: off-diagonal entries drawn uniformly in
    /// `[0, scale)` row by row, diagonal set to the negated row sum.
    pub fn rate_matrix(&mut self, d: usize, scale: f64) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    m[(i, j)] = self.uniform(0.0, scale);
                }
            }
            let s: f64 = m.row(i).iter().sum();
            m[(i, i)] = -s;
        }
        m
    }
}
