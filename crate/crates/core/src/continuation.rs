//! Evaluation of f(s, θ) for Re s > 1 and its numerical continuation into
//! Re s > 1/2.
//!
//! For Re s > 1 two independent evaluators are available: the Euler
//! product over primes and the raw Dirichlet partial sum with coefficients
//! `a_n(θ) = e^{2πiθℓ(n)}`. Past the abscissa the product diverges, but
//! the log derivative splits into three series,
//!
//! ```text
//!   −f′/f = F + R₁ − R₂
//!   F  = Σ_n Λ(n) e^{2πiθn} n^{−s}
//!   R₁ = Σ_p Σ_{m≥2} ln p · e^{2πimθp} p^{−ms}   (inner sum closed form)
//!   R₂ = Σ_p Σ_{m≥2} ln p · e^{2πiθp^m} p^{−ms}
//! ```
//!
//! R₁ and R₂ converge absolutely for σ > 1/2; F converges there for
//! almost every θ, with a θ-dependent constant no computation can
//! certify — its reported tail is heuristic and results in the strip
//! 1/2 < σ ≤ 1 are flagged accordingly. `log f` is continued by
//! integrating f′/f horizontally from an anchor on σ₀ = 2, where the
//! product converges fast; it is never obtained by taking a complex log
//! of f, so no branch-cut dispatch is needed. Winding numbers of f around
//! rectangles are computed from the same integrand by the argument
//! principle and double as a consistency check: any truncated integrand
//! is entire, so a nonzero winding is a quadrature red flag.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::exp_sums::{trace, GridSpec};
use crate::numeric::KahanComplex;
use crate::phase::{frac_mul, unit_phase, RationalPhase};
use crate::prime_tables::LambdaTable;
use crate::quad;
use crate::theta::{Provenance, ThetaSample};

/// A point s = σ + it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SPoint {
    pub sigma: f64,
    pub t: f64,
}

impl SPoint {
    pub fn new(sigma: f64, t: f64) -> Self {
        Self { sigma, t }
    }

    #[inline]
    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.sigma, self.t)
    }

    #[inline]
    pub fn abs(self) -> f64 {
        self.to_complex().norm()
    }
}

/// Truncation and quadrature controls. Every result carries a copy of
/// what was actually used.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContinuationParams {
    /// F-series truncation.
    pub n_max: u64,
    /// Euler-product / R₁ prime truncation.
    pub p_max: u64,
    /// R₂ prime-power cutoff.
    pub cutoff: u64,
    /// ε in the heuristic F-tail exponent.
    pub epsilon: f64,
    /// Anchor line for continuation.
    pub anchor_sigma: f64,
    /// Continuation refuses points with σ ≤ 1/2 + margin.
    pub margin: f64,
    /// Absolute tolerance for the continuation integral.
    pub quad_tol: f64,
    /// Absolute tolerance for a whole winding contour.
    pub winding_tol: f64,
    /// Max panel bisection depth.
    pub max_depth: u32,
    /// Override for the sup constant in the F tail; measured from a trace
    /// when absent.
    pub sup_constant: Option<f64>,
}

impl Default for ContinuationParams {
    fn default() -> Self {
        Self {
            n_max: 1_000_000,
            p_max: 1_000_000,
            cutoff: 1_000_000,
            epsilon: 0.05,
            anchor_sigma: 2.0,
            margin: 0.05,
            quad_tol: 1e-8,
            winding_tol: 1e-4,
            max_depth: 40,
            sup_constant: None,
        }
    }
}

/// A truncated series value with an estimate of the absolute truncation
/// error (∞ when no bound applies).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeriesSum {
    pub value: Complex64,
    pub tail: f64,
}

/// Euler product value together with its log (the branch actually summed)
/// and a bound on the truncation error of the log.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EulerEval {
    pub value: Complex64,
    pub log: Complex64,
    pub log_tail: f64,
}

/// f′/f with a combined series-truncation error estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LogDeriv {
    pub value: Complex64,
    pub err: f64,
}

/// Continued value at one point.
#[derive(Debug, Clone, Serialize)]
pub struct ContinuationResult {
    pub s: SPoint,
    pub theta: ThetaSample,
    pub log_f: Complex64,
    /// exp(log_f), by construction never zero.
    pub f: Complex64,
    pub logderiv: Complex64,
    /// Estimated absolute error on log_f (anchor tail + quadrature +
    /// integrated series tails).
    pub trunc_error: f64,
    pub params: TruncationRecord,
    pub flags: Vec<String>,
}

/// Record of the truncations behind a result.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TruncationRecord {
    pub n_max: u64,
    pub p_max: u64,
    pub cutoff: u64,
    pub epsilon: f64,
    pub anchor_sigma: f64,
    pub quad_order: u32,
    pub quad_tol: f64,
    pub sup_constant: f64,
}

/// Rectangle in the s-plane.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Rect {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

/// Winding number (1/2πi)∮ f′/f ds around a rectangle.
#[derive(Debug, Clone, Serialize)]
pub struct WindingResult {
    pub raw: Complex64,
    pub nearest: i64,
    pub quad_error: f64,
    pub panels: usize,
    /// Set when the integrand is suspiciously large somewhere on the
    /// contour (near-vanishing f makes the integral stiff).
    pub stiff: bool,
}

// ---------------------------------------------------------------------------
// coefficients and σ > 1 evaluators

/// a_n(θ) = e^{2πiθℓ(n)}; a_1 = 1.
pub fn coefficient(n: u64, theta: &ThetaSample, table: &LambdaTable) -> Result<Complex64> {
    let ell = table.sopfr(n)?;
    Ok(match theta.provenance() {
        Provenance::Rational { a, q } => RationalPhase::phase_of(a, q, ell),
        _ => unit_phase(frac_mul(ell, theta.value())),
    })
}

/// n^{−s} for s = σ + it, from ln n.
#[inline]
fn power_neg(ln_n: f64, sigma: f64, t: f64) -> Complex64 {
    let r = (-sigma * ln_n).exp();
    let (s, c) = (-t * ln_n).sin_cos();
    Complex64::new(r * c, r * s)
}

/// ∏_{p ≤ p_max} (1 − e^{2πiθp} p^{−s})^{−1} for σ > 1, with a bound on
/// the truncated part of the log (≤ Σ_{p>p_max} 2p^{−σ}, estimated by
/// integral comparison against the prime density).
pub fn euler_product(
    s: SPoint,
    theta: &ThetaSample,
    p_max: u64,
    table: &LambdaTable,
) -> Result<EulerEval> {
    if s.sigma <= 1.0 {
        return Err(Error::domain(format!(
            "Euler product needs Re s > 1, got sigma = {}",
            s.sigma
        )));
    }
    if p_max > table.limit() {
        return Err(Error::invalid(format!("p_max {p_max} exceeds table limit {}", table.limit())));
    }
    let terms = build_prime_terms(theta, p_max, table);
    let log = anchor_log_sum(&terms, s.sigma, s.t);
    Ok(EulerEval { value: log.exp(), log, log_tail: euler_log_tail(s.sigma, p_max) })
}

/// Σ_{n ≤ n_max} a_n(θ) n^{−s}. The tail bound is the crude absolute one
/// (|a_n| = 1), available only for σ > 1; below that the value is a raw
/// partial sum with an infinite reported tail.
pub fn dirichlet_partial(
    s: SPoint,
    theta: &ThetaSample,
    n_max: u64,
    table: &LambdaTable,
) -> Result<SeriesSum> {
    if n_max < 1 || n_max > table.limit() {
        return Err(Error::invalid(format!(
            "n_max {n_max} outside table range 1..={}",
            table.limit()
        )));
    }
    let rational = theta.as_rational();
    let mut acc = KahanComplex::new();
    acc.add(Complex64::new(1.0, 0.0)); // n = 1
    for n in 2..=n_max {
        let ell = table.sopfr(n)?;
        let phase = match rational {
            Some((a, q)) => RationalPhase::phase_of(a, q, ell),
            None => unit_phase(frac_mul(ell, theta.value())),
        };
        acc.add(phase * power_neg((n as f64).ln(), s.sigma, s.t));
    }
    Ok(SeriesSum { value: acc.sum(), tail: dirichlet_tail(s.sigma, n_max) })
}

// ---------------------------------------------------------------------------
// the three series of the log-derivative decomposition

/// One series term: weight · phase · e^{−s·ln_n}.
#[derive(Debug, Clone, Copy)]
struct Term {
    ln_n: f64,
    weight: f64,
    phase: Complex64,
}

fn theta_phase(theta: &ThetaSample, n: u64) -> Complex64 {
    match theta.provenance() {
        Provenance::Rational { a, q } => RationalPhase::phase_of(a, q, n),
        _ => unit_phase(frac_mul(n, theta.value())),
    }
}

/// Terms of F: prime powers n = p^m ≤ n_max, weight Λ(n) = ln p,
/// phase e^{2πiθn}.
fn build_f_terms(theta: &ThetaSample, n_max: u64, table: &LambdaTable) -> Vec<Term> {
    let pps = table.prime_powers();
    let end = pps.partition_point(|pp| pp.n <= n_max);
    pps[..end]
        .iter()
        .map(|pp| Term {
            ln_n: (pp.n as f64).ln(),
            weight: pp.lambda(),
            phase: theta_phase(theta, pp.n),
        })
        .collect()
}

/// Per-prime data for R₁ and the Euler/anchor logs: ln p and e^{2πiθp}.
fn build_prime_terms(theta: &ThetaSample, p_max: u64, table: &LambdaTable) -> Vec<Term> {
    let primes = table.primes();
    let end = primes.partition_point(|&p| p as u64 <= p_max);
    primes[..end]
        .iter()
        .map(|&p| {
            let ln_p = (p as f64).ln();
            Term { ln_n: ln_p, weight: ln_p, phase: theta_phase(theta, p as u64) }
        })
        .collect()
}

/// Terms of R₂: prime powers p^m ≤ cutoff with m ≥ 2, weight ln p,
/// phase e^{2πiθp^m}; note p^{−ms} = n^{−s}.
fn build_r2_terms(theta: &ThetaSample, cutoff: u64, table: &LambdaTable) -> Vec<Term> {
    let pps = table.prime_powers();
    let end = pps.partition_point(|pp| pp.n <= cutoff);
    pps[..end]
        .iter()
        .filter(|pp| pp.m >= 2)
        .map(|pp| Term {
            ln_n: (pp.n as f64).ln(),
            weight: pp.lambda(),
            phase: theta_phase(theta, pp.n),
        })
        .collect()
}

/// Σ weight · phase · n^{−s}, compensated, chunked in a fixed order so the
/// result is independent of the rayon schedule.
fn sum_power_terms(terms: &[Term], sigma: f64, t: f64) -> Complex64 {
    const CHUNK: usize = 16_384;
    if terms.len() <= CHUNK {
        let mut acc = KahanComplex::new();
        for term in terms {
            acc.add(term.weight * term.phase * power_neg(term.ln_n, sigma, t));
        }
        return acc.sum();
    }
    let partials: Vec<Complex64> = terms
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = KahanComplex::new();
            for term in chunk {
                acc.add(term.weight * term.phase * power_neg(term.ln_n, sigma, t));
            }
            acc.sum()
        })
        .collect();
    let mut total = KahanComplex::new();
    for p in partials {
        total.add(p);
    }
    total.sum()
}

/// Σ_p ln p · x²/(1−x) with x = e^{2πiθp} p^{−s} (closed-form inner
/// geometric sum of R₁).
fn sum_r1_terms(terms: &[Term], sigma: f64, t: f64) -> Complex64 {
    const CHUNK: usize = 16_384;
    let eval = |chunk: &[Term]| {
        let mut acc = KahanComplex::new();
        for term in chunk {
            let x = term.phase * power_neg(term.ln_n, sigma, t);
            acc.add(term.weight * x * x / (1.0 - x));
        }
        acc.sum()
    };
    if terms.len() <= CHUNK {
        return eval(terms);
    }
    let partials: Vec<Complex64> = terms.par_chunks(CHUNK).map(eval).collect();
    let mut total = KahanComplex::new();
    for p in partials {
        total.add(p);
    }
    total.sum()
}

/// −Σ_p Log(1 − e^{2πiθp} p^{−s}), principal branch per factor (every
/// factor has |x| < 1/2 for σ ≥ 2, so no branch ambiguity).
fn anchor_log_sum(terms: &[Term], sigma: f64, t: f64) -> Complex64 {
    const CHUNK: usize = 16_384;
    let eval = |chunk: &[Term]| {
        let mut acc = KahanComplex::new();
        for term in chunk {
            let x = term.phase * power_neg(term.ln_n, sigma, t);
            acc.add(-(1.0 - x).ln());
        }
        acc.sum()
    };
    if terms.len() <= CHUNK {
        return eval(terms);
    }
    let partials: Vec<Complex64> = terms.par_chunks(CHUNK).map(eval).collect();
    let mut total = KahanComplex::new();
    for p in partials {
        total.add(p);
    }
    total.sum()
}

// ---------------------------------------------------------------------------
// tail estimates

/// Σ_{p>P} 2p^{−σ} by integral comparison with the prime density (σ > 1).
fn euler_log_tail(sigma: f64, p_max: u64) -> f64 {
    let p = p_max as f64;
    2.0 * p.powf(1.0 - sigma) / ((sigma - 1.0) * p.ln())
}

/// Σ_{n>X} n^{−σ} ≤ X^{1−σ}/(σ−1) for σ > 1; no bound below.
fn dirichlet_tail(sigma: f64, n_max: u64) -> f64 {
    if sigma > 1.0 {
        (n_max as f64).powf(1.0 - sigma) / (sigma - 1.0)
    } else {
        f64::INFINITY
    }
}

/// F-series tail at abscissa `sigma` for a point of modulus `s_abs`. The
/// heuristic piece assumes |S_u| ≤ C·u^{1/2+ε} beyond the truncation (the
/// almost-everywhere bound; not certified for any specific θ). For σ > 1
/// it is capped by the unconditional Chebyshev bound ψ(u) < 1.04u.
fn f_tail(sigma: f64, s_abs: f64, n_max: u64, epsilon: f64, c_sup: f64) -> f64 {
    let x = n_max as f64;
    // keep the exponent meaningful all the way down to the margin
    let eps = epsilon.min(0.5 * (sigma - 0.5));
    let heuristic = c_sup * s_abs * x.powf(0.5 + eps - sigma) / (sigma - 0.5 - eps);
    if sigma > 1.0 {
        let rigorous = 1.04 * sigma / (sigma - 1.0) * x.powf(1.0 - sigma);
        heuristic.min(rigorous)
    } else {
        heuristic
    }
}

/// Σ_{p>P} ln p · p^{−2σ}/(1−p^{−σ}), bounded through the integer sum
/// Σ_{n>P} ln n · n^{−2σ} and ∫ ln u · u^{−2σ} du.
fn r1_tail(sigma: f64, p_max: u64) -> f64 {
    let p = p_max as f64;
    let a = 2.0 * sigma;
    let integral = p.powf(1.0 - a) * (p.ln() * (a - 1.0) + 1.0) / ((a - 1.0) * (a - 1.0));
    (p.ln() * p.powf(-a) + integral) / (1.0 - p.powf(-sigma))
}

/// Σ over prime powers p^m > cutoff, m ≥ 2, of ln p · p^{−mσ}; per-m
/// integer-sum/integral comparison, summed until contributions vanish.
fn r2_tail(sigma: f64, cutoff: u64) -> f64 {
    let x = cutoff as f64;
    let mut total = 0.0;
    for m in 2..=256u32 {
        let a = m as f64 * sigma;
        let l = x.powf(1.0 / m as f64).max(2.0);
        let head = l.ln() * l.powf(-a);
        let integral = l.powf(1.0 - a) * (l.ln() * (a - 1.0) + 1.0) / ((a - 1.0) * (a - 1.0));
        let contribution = head + integral;
        total += contribution;
        if contribution < 1e-30 {
            break;
        }
    }
    total
}

fn require_half_plane(sigma: f64, what: &str) -> Result<()> {
    if sigma <= 0.5 {
        return Err(Error::domain(format!("{what} needs Re s > 1/2, got sigma = {sigma}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// standalone series operations

/// F(s, θ) = Σ_{n ≤ n_max} Λ(n) e^{2πiθn} n^{−s} with the heuristic tail;
/// `sup_constant` should come from a trace of S_N for this θ.
pub fn f_series(
    s: SPoint,
    theta: &ThetaSample,
    n_max: u64,
    sup_constant: f64,
    table: &LambdaTable,
) -> Result<SeriesSum> {
    require_half_plane(s.sigma, "F series")?;
    if n_max > table.limit() {
        return Err(Error::invalid(format!("n_max {n_max} exceeds table limit {}", table.limit())));
    }
    let terms = build_f_terms(theta, n_max, table);
    let value = sum_power_terms(&terms, s.sigma, s.t);
    let tail = f_tail(s.sigma, s.abs(), n_max, ContinuationParams::default().epsilon, sup_constant);
    Ok(SeriesSum { value, tail })
}

/// R₁(s, θ) = Σ_{p ≤ p_max} ln p · x²/(1−x), x = e^{2πiθp} p^{−s}.
pub fn r1_series(
    s: SPoint,
    theta: &ThetaSample,
    p_max: u64,
    table: &LambdaTable,
) -> Result<SeriesSum> {
    require_half_plane(s.sigma, "R1 series")?;
    if p_max > table.limit() {
        return Err(Error::invalid(format!("p_max {p_max} exceeds table limit {}", table.limit())));
    }
    let terms = build_prime_terms(theta, p_max, table);
    Ok(SeriesSum { value: sum_r1_terms(&terms, s.sigma, s.t), tail: r1_tail(s.sigma, p_max) })
}

/// R₂(s, θ) = Σ_{p^m ≤ cutoff, m ≥ 2} ln p · e^{2πiθp^m} p^{−ms}. No
/// closed form exists (the phase depends on p^m), so the outer sum is
/// explicit.
pub fn r2_series(
    s: SPoint,
    theta: &ThetaSample,
    cutoff: u64,
    table: &LambdaTable,
) -> Result<SeriesSum> {
    require_half_plane(s.sigma, "R2 series")?;
    if cutoff > table.limit() {
        return Err(Error::invalid(format!("cutoff {cutoff} exceeds table limit {}", table.limit())));
    }
    let terms = build_r2_terms(theta, cutoff, table);
    Ok(SeriesSum { value: sum_power_terms(&terms, s.sigma, s.t), tail: r2_tail(s.sigma, cutoff) })
}

/// f′/f at a single point through a throwaway evaluator.
pub fn log_derivative(
    s: SPoint,
    theta: &ThetaSample,
    params: &ContinuationParams,
    table: &LambdaTable,
) -> Result<LogDeriv> {
    Evaluator::new(theta, params, table)?.log_derivative(s)
}

/// Continuation of log f to s via the anchor integral.
pub fn continue_log_f(
    s: SPoint,
    theta: &ThetaSample,
    params: &ContinuationParams,
    table: &LambdaTable,
) -> Result<ContinuationResult> {
    Evaluator::new(theta, params, table)?.continue_log_f(s)
}

/// Winding number of f around a rectangle.
pub fn winding_number(
    rect: Rect,
    theta: &ThetaSample,
    grid_step: f64,
    params: &ContinuationParams,
    table: &LambdaTable,
) -> Result<WindingResult> {
    Evaluator::new(theta, params, table)?.winding_number(rect, grid_step)
}

// ---------------------------------------------------------------------------
// cached evaluator

/// Caches the θ-dependent series terms (phases, logs, weights) so that
/// repeated f′/f evaluations — quadrature nodes, winding contours — cost
/// one exp and one sincos per term.
pub struct Evaluator {
    theta: ThetaSample,
    params: ContinuationParams,
    f_terms: Vec<Term>,
    prime_terms: Vec<Term>,
    r2_terms: Vec<Term>,
    sup_constant: f64,
}

impl Evaluator {
    pub fn new(
        theta: &ThetaSample,
        params: &ContinuationParams,
        table: &LambdaTable,
    ) -> Result<Self> {
        let max_trunc = params.n_max.max(params.p_max).max(params.cutoff);
        if max_trunc > table.limit() {
            return Err(Error::invalid(format!(
                "truncation {max_trunc} exceeds table limit {}",
                table.limit()
            )));
        }
        if params.anchor_sigma <= 1.0 {
            return Err(Error::invalid(format!(
                "anchor sigma must exceed 1, got {}",
                params.anchor_sigma
            )));
        }
        let sup_constant = match params.sup_constant {
            Some(c) => c,
            None => measure_sup_constant(theta, params, table)?,
        };
        Ok(Self {
            theta: *theta,
            params: *params,
            f_terms: build_f_terms(theta, params.n_max, table),
            prime_terms: build_prime_terms(theta, params.p_max, table),
            r2_terms: build_r2_terms(theta, params.cutoff, table),
            sup_constant,
        })
    }

    pub fn sup_constant(&self) -> f64 {
        self.sup_constant
    }

    pub fn theta(&self) -> &ThetaSample {
        &self.theta
    }

    /// f′/f = −(F + R₁ − R₂) from the cached terms.
    pub fn log_derivative(&self, s: SPoint) -> Result<LogDeriv> {
        require_half_plane(s.sigma, "log derivative")?;
        let f = sum_power_terms(&self.f_terms, s.sigma, s.t);
        let r1 = sum_r1_terms(&self.prime_terms, s.sigma, s.t);
        let r2 = sum_power_terms(&self.r2_terms, s.sigma, s.t);
        let err = f_tail(s.sigma, s.abs(), self.params.n_max, self.params.epsilon, self.sup_constant)
            + r1_tail(s.sigma, self.params.p_max)
            + r2_tail(s.sigma, self.params.cutoff);
        Ok(LogDeriv { value: -(f + r1 - r2), err })
    }

    /// Folds the t-dependent factor of every term into a constant, for
    /// integrands along horizontal segments (one real exp per term and
    /// node instead of exp + sincos).
    fn freeze_t(&self, t: f64) -> FrozenT {
        let fold = |term: &Term, sign: f64| {
            let (s, c) = (-t * term.ln_n).sin_cos();
            (term.ln_n, sign * term.weight * term.phase * Complex64::new(c, s))
        };
        let mut power: Vec<(f64, Complex64)> =
            self.f_terms.iter().map(|tm| fold(tm, 1.0)).collect();
        power.extend(self.r2_terms.iter().map(|tm| fold(tm, -1.0)));
        let r1 = self
            .prime_terms
            .iter()
            .map(|tm| {
                let (s, c) = (-t * tm.ln_n).sin_cos();
                (tm.ln_n, tm.weight, tm.phase * Complex64::new(c, s))
            })
            .collect();
        FrozenT { power, r1 }
    }

    /// Same idea along vertical segments: n^{−σ} folded in, one sincos
    /// per term and node.
    fn freeze_sigma(&self, sigma: f64) -> FrozenSigma {
        let fold = |term: &Term, sign: f64| {
            (term.ln_n, sign * term.weight * term.phase * (-sigma * term.ln_n).exp())
        };
        let mut power: Vec<(f64, Complex64)> =
            self.f_terms.iter().map(|tm| fold(tm, 1.0)).collect();
        power.extend(self.r2_terms.iter().map(|tm| fold(tm, -1.0)));
        let r1 = self
            .prime_terms
            .iter()
            .map(|tm| (tm.ln_n, tm.weight, tm.phase * (-sigma * tm.ln_n).exp()))
            .collect();
        FrozenSigma { power, r1 }
    }

    /// Anchor value log f(σ₀ + it) from the prime factors.
    fn anchor_log(&self, sigma0: f64, t: f64) -> Complex64 {
        anchor_log_sum(&self.prime_terms, sigma0, t)
    }

    /// ln f(s) = ln f(σ₀ + it) + ∫_{σ₀}^{σ} (f′/f)(u + it) du.
    pub fn continue_log_f(&self, s: SPoint) -> Result<ContinuationResult> {
        let p = &self.params;
        if s.sigma <= 0.5 + p.margin {
            return Err(Error::domain(format!(
                "continuation needs Re s > 1/2 + margin ({}), got sigma = {}",
                0.5 + p.margin,
                s.sigma
            )));
        }
        let anchor = self.anchor_log(p.anchor_sigma, s.t);
        let anchor_tail = euler_log_tail(p.anchor_sigma, p.p_max);

        let frozen = self.freeze_t(s.t);
        let integrand = |u: f64| frozen.log_deriv(u);
        let q = quad::integrate(&integrand, p.anchor_sigma, s.sigma, p.quad_tol, p.max_depth)?;

        // Series truncation error along the segment: tails are largest at
        // the smallest abscissa, |s| at the largest, so bound with both.
        let sigma_min = s.sigma.min(p.anchor_sigma);
        let sigma_max = s.sigma.max(p.anchor_sigma);
        let s_abs_max = (sigma_max * sigma_max + s.t * s.t).sqrt();
        let node_err = f_tail(sigma_min, s_abs_max, p.n_max, p.epsilon, self.sup_constant)
            + r1_tail(sigma_min, p.p_max)
            + r2_tail(sigma_min, p.cutoff);
        let length = (s.sigma - p.anchor_sigma).abs();

        let log_f = anchor + q.value;
        let logderiv = self.log_derivative(s)?;
        let mut flags = Vec::new();
        if s.sigma <= 1.0 {
            flags.push("heuristic_tail".to_string());
        }
        if logderiv.value.norm() > 1e3 {
            flags.push("stiff_suspect".to_string());
        }
        Ok(ContinuationResult {
            s,
            theta: self.theta,
            log_f,
            f: log_f.exp(),
            logderiv: logderiv.value,
            trunc_error: anchor_tail + q.error_estimate + length * node_err,
            params: TruncationRecord {
                n_max: p.n_max,
                p_max: p.p_max,
                cutoff: p.cutoff,
                epsilon: p.epsilon,
                anchor_sigma: p.anchor_sigma,
                quad_order: 16,
                quad_tol: p.quad_tol,
                sup_constant: self.sup_constant,
            },
            flags,
        })
    }

    /// (1/2πi) ∮ f′/f ds counterclockwise around `rect`, composite
    /// adaptive panels of initial length ≤ `grid_step`, panels evaluated
    /// in parallel and summed in contour order.
    pub fn winding_number(&self, rect: Rect, grid_step: f64) -> Result<WindingResult> {
        let p = &self.params;
        if !(rect.sigma_min < rect.sigma_max && rect.t_min < rect.t_max) {
            return Err(Error::invalid("degenerate rectangle".to_string()));
        }
        if rect.sigma_min <= 0.5 + p.margin {
            return Err(Error::domain(format!(
                "rectangle must stay in Re s > 1/2 + margin ({})",
                0.5 + p.margin
            )));
        }
        if !(grid_step.is_finite() && grid_step > 0.0) {
            return Err(Error::invalid(format!("bad grid step {grid_step}")));
        }

        // Counterclockwise: bottom, right, top, left. Each edge maps a real
        // parameter u to s(u) with a constant direction factor ds/du; the
        // constant coordinate is folded into a frozen evaluator per edge.
        enum EdgeEval {
            Horizontal(FrozenT),
            Vertical(FrozenSigma),
        }
        struct Edge {
            from: f64,
            to: f64,
            eval: EdgeEval,
            dir: Complex64,
        }
        let edges = [
            Edge {
                from: rect.sigma_min,
                to: rect.sigma_max,
                eval: EdgeEval::Horizontal(self.freeze_t(rect.t_min)),
                dir: Complex64::new(1.0, 0.0),
            },
            Edge {
                from: rect.t_min,
                to: rect.t_max,
                eval: EdgeEval::Vertical(self.freeze_sigma(rect.sigma_max)),
                dir: Complex64::new(0.0, 1.0),
            },
            Edge {
                from: rect.sigma_max,
                to: rect.sigma_min,
                eval: EdgeEval::Horizontal(self.freeze_t(rect.t_max)),
                dir: Complex64::new(1.0, 0.0),
            },
            Edge {
                from: rect.t_max,
                to: rect.t_min,
                eval: EdgeEval::Vertical(self.freeze_sigma(rect.sigma_min)),
                dir: Complex64::new(0.0, 1.0),
            },
        ];
        let perimeter = 2.0 * (rect.sigma_max - rect.sigma_min) + 2.0 * (rect.t_max - rect.t_min);

        // Panel work list in contour order.
        let mut panels: Vec<(usize, f64, f64)> = Vec::new();
        for (i, e) in edges.iter().enumerate() {
            let len = (e.to - e.from).abs();
            let count = (len / grid_step).ceil().max(1.0) as usize;
            let h = (e.to - e.from) / count as f64;
            for k in 0..count {
                let a = e.from + h * k as f64;
                let b = if k + 1 == count { e.to } else { e.from + h * (k + 1) as f64 };
                panels.push((i, a, b));
            }
        }

        let results: Vec<Result<quad::QuadResult>> = panels
            .par_iter()
            .map(|&(ei, a, b)| {
                let e = &edges[ei];
                let g = |u: f64| {
                    let v = match &e.eval {
                        EdgeEval::Horizontal(fr) => fr.log_deriv(u),
                        EdgeEval::Vertical(fr) => fr.log_deriv(u),
                    };
                    v * e.dir
                };
                let tol = p.winding_tol * ((b - a).abs() / perimeter);
                quad::integrate(&g, a, b, tol, p.max_depth)
            })
            .collect();

        let mut total = KahanComplex::new();
        let mut err = 0.0;
        let mut count = 0usize;
        for r in results {
            let r = r?;
            total.add(r.value);
            err += r.error_estimate;
            count += r.panels;
        }

        // Coarse stiffness probe at the corners and edge midpoints.
        let probes = [
            SPoint::new(rect.sigma_min, rect.t_min),
            SPoint::new(rect.sigma_max, rect.t_min),
            SPoint::new(rect.sigma_min, rect.t_max),
            SPoint::new(rect.sigma_max, rect.t_max),
            SPoint::new(rect.sigma_min, 0.5 * (rect.t_min + rect.t_max)),
            SPoint::new(rect.sigma_max, 0.5 * (rect.t_min + rect.t_max)),
        ];
        let stiff = probes
            .iter()
            .filter_map(|&s| self.log_derivative(s).ok())
            .any(|ld| ld.value.norm() > 1e3);

        let raw = total.sum() / Complex64::new(0.0, TAU);
        Ok(WindingResult {
            raw,
            nearest: raw.re.round() as i64,
            quad_error: err / TAU,
            panels: count,
            stiff,
        })
    }
}

/// Terms of −(F − R₂) and R₁ with the t-dependent factor pre-applied;
/// evaluation varies σ only. `power` holds (ln n, c) with the R₂ entries
/// sign-flipped, `r1` holds (ln p, ln p, y) with x = y·p^{−σ}.
struct FrozenT {
    power: Vec<(f64, Complex64)>,
    r1: Vec<(f64, f64, Complex64)>,
}

impl FrozenT {
    /// f′/f at σ + it for the frozen t.
    fn log_deriv(&self, sigma: f64) -> Complex64 {
        let mut acc = KahanComplex::new();
        for &(ln_n, c) in &self.power {
            acc.add(c * (-sigma * ln_n).exp());
        }
        for &(ln_p, weight, y) in &self.r1 {
            let x = y * (-sigma * ln_p).exp();
            acc.add(weight * x * x / (1.0 - x));
        }
        -acc.sum()
    }
}

/// Mirror image: σ frozen, t varies (vertical contour edges).
struct FrozenSigma {
    power: Vec<(f64, Complex64)>,
    r1: Vec<(f64, f64, Complex64)>,
}

impl FrozenSigma {
    fn log_deriv(&self, t: f64) -> Complex64 {
        let mut acc = KahanComplex::new();
        for &(ln_n, c) in &self.power {
            let (s, cc) = (-t * ln_n).sin_cos();
            acc.add(c * Complex64::new(cc, s));
        }
        for &(ln_p, weight, y) in &self.r1 {
            let (s, cc) = (-t * ln_p).sin_cos();
            let x = y * Complex64::new(cc, s);
            acc.add(weight * x * x / (1.0 - x));
        }
        -acc.sum()
    }
}

/// Measured sup constant for the heuristic F tail: sup over a geometric
/// grid of |S_N|/N^{1/2+ε}.
fn measure_sup_constant(
    theta: &ThetaSample,
    params: &ContinuationParams,
    table: &LambdaTable,
) -> Result<f64> {
    let grid = if params.n_max >= 100 {
        GridSpec::Geometric { start: 100, ratio: 2.0 }.materialize(params.n_max)?
    } else {
        vec![params.n_max.max(2)]
    };
    let tr = trace(theta, &grid, table)?;
    Ok(tr.sup_ratio(params.epsilon).max(1.0))
}
