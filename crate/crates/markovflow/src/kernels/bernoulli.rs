//! Exact Bernoulli numbers in the convention `b₁ = −1/2`, i.e. the Taylor
//! coefficients of `f(x) = x/(eˣ − 1) = Σ bₙ/n! xⁿ`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::{Error, Result};

/// Hard cap on the exact table; beyond this the table has no consumer in the
/// crate and the contract refuses rather than silently degrading.
pub const MAX_ORDER: usize = 60;

/// Exact Bernoulli numbers `b₀ … b_N`.
#[derive(Debug, Clone)]
pub struct BernoulliTable {
    values: Vec<BigRational>,
}

impl BernoulliTable {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, n: usize) -> &BigRational {
        &self.values[n]
    }

    pub fn to_f64(&self, n: usize) -> f64 {
        self.values[n]
            .to_f64()
            .expect("Bernoulli numbers are finite")
    }

    /// The series coefficients `bₙ/n!` of `f`, as `f64`.
    pub fn f_coefficients(&self) -> Vec<f64> {
        let mut fact = BigRational::one();
        self.values
            .iter()
            .enumerate()
            .map(|(n, b)| {
                if n > 0 {
                    fact *= BigRational::from_integer(BigInt::from(n));
                }
                (b / &fact).to_f64().expect("finite coefficient")
            })
            .collect()
    }
}

/// Generates `b₀ … b_N` exactly via the recurrence
/// `Σ_{k=0}^{n} C(n+1, k)·b_k = 0` for `n ≥ 1`, which fixes `b₁ = −1/2`.
pub fn bernoulli_numbers(n_max: usize) -> Result<BernoulliTable> {
    if n_max > MAX_ORDER {
        return Err(Error::BernoulliOrderTooLarge(n_max));
    }
    let mut values: Vec<BigRational> = Vec::with_capacity(n_max + 1);
    values.push(BigRational::one());
    for n in 1..=n_max {
        // binomials C(n+1, k) built incrementally
        let mut acc = BigRational::zero();
        let mut binom = BigInt::one(); // C(n+1, 0)
        for (k, b) in values.iter().enumerate() {
            acc += BigRational::from_integer(binom.clone()) * b;
            // C(n+1, k+1) = C(n+1, k) · (n+1−k)/(k+1)
            binom = binom * BigInt::from(n + 1 - k) / BigInt::from(k + 1);
        }
        // C(n+1, n) = n+1
        values.push(-acc / BigRational::from_integer(BigInt::from(n + 1)));
    }
    Ok(BernoulliTable { values })
}

/// `f64` Taylor coefficients `cₙ = bₙ/n!` of `f(x) = x/(eˣ−1)`, computed by
/// the power-series division `f(x)·(eˣ−1)/x = 1`, i.e.
/// `cₙ = −Σ_{k<n} c_k/(n−k+1)!`. Used for long truncated series where the
/// exact table is unnecessary.
pub fn f_series_coefficients_f64(count: usize) -> Vec<f64> {
    let mut inv_fact = vec![0.0; count + 2];
    inv_fact[0] = 1.0;
    for i in 1..inv_fact.len() {
        inv_fact[i] = inv_fact[i - 1] / i as f64;
    }
    let mut c = vec![0.0; count];
    if count == 0 {
        return c;
    }
    c[0] = 1.0;
    for n in 1..count {
        let mut acc = 0.0;
        for k in 0..n {
            acc += c[k] * inv_fact[n - k + 1];
        }
        c[n] = -acc;
    }
    c
}
