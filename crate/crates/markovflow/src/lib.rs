//! Structured algebra and exact flow solutions for time-inhomogeneous Markov
//! chains with equal-input generators.
//!
//! The crate is organised in five layers:
//!
//! * [`algebra`] — the exact O(d) algebra of equal-rows, equal-input and
//!   zero-row-sum matrices, stored by their parameter vectors.
//! * [`kernels`] — scalar special functions (`h`, `f`, `g` and the
//!   antiderivative of `g`), exact Bernoulli numbers, and matrix-argument
//!   evaluation of `exp`, `f`, `g`.
//! * [`flows`] — closed-form solutions of `Ṁ = M·Q(t)`, `M(0) = I` for
//!   equal-input, perturbed and commuting generator families, together with
//!   principal logarithms and embeddability verdicts.
//! * [`oracles`] — independent numeric ground truth: Peano–Baker series,
//!   Runge–Kutta integration, dense matrix exponential/logarithm, and a
//!   Magnus-residual checker.
//! * [`scenario`] — the JSON scenario format, the check runner, and the
//!   CSV/JSON report emitters behind the `markovflow` CLI.

pub mod algebra;
pub mod dense;
pub mod error;
pub mod family;
pub mod flows;
pub mod kernels;
pub mod log;
pub mod oracles;
pub mod quad;
pub mod rng;
pub mod scenario;
pub mod timefn;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;
