//! Random Euler products over the primes.
//!
//! The central object is
//!
//! ```text
//!     f(s, θ) = ∏_p (1 − e^{2πiθp} p^{−s})^{−1},    Re s > 1,  θ ∈ [0, 1),
//! ```
//!
//! a Dirichlet series with completely multiplicative unit-modulus
//! coefficients `a_n(θ) = e^{2πiθ·ℓ(n)}`, where `ℓ(n)` is the sum of the
//! prime factors of `n` with multiplicity. This crate provides
//!
//! * exact integer-side tables (primes, von Mangoldt Λ, ℓ, Chebyshev ψ),
//! * evaluation of the exponential sums `S_N(θ) = Σ Λ(n) e^{2πiθn}` and
//!   their Abel-summation companions,
//! * a harness that checks the hypotheses of the Erdős–Gál–Koksma lemma
//!   (blockwise subadditivity, exact L² moments) and samples its
//!   conclusion over θ,
//! * numerical continuation of `log f` into the half plane Re s > 1/2
//!   through the decomposition `−f′/f = F + R₁ − R₂`, with winding-number
//!   consistency scans,
//! * seeded, reproducible Monte Carlo campaigns estimating the growth
//!   exponent of `|S_N(θ)|`.
//!
//! Everything is deterministic given its seeds: random θ are produced by a
//! counter-based generator, so results do not depend on thread schedules.

pub mod continuation;
pub mod egk;
pub mod error;
pub mod experiments;
pub mod exp_sums;
pub mod numeric;
pub mod phase;
pub mod prime_tables;
pub mod quad;
pub mod rng;
pub mod theta;

pub use error::{Error, Result};
pub use prime_tables::LambdaTable;
pub use theta::ThetaSample;
