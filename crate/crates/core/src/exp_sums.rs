//! The exponential sums over prime powers.
//!
//! * `S_N(θ)  = Σ_{n=2}^{N} Λ(n) e^{2πiθn}`
//! * `ℭ(u)    = Σ_{1<n≤u} (Λ(n)/ln n) e^{2πiθn}`, with Λ(n)/ln n = 1/m for
//!   n = p^m — always computed from the exponent, never as a log ratio
//! * `F(M,N,θ) = |Σ_{M<n≤M+N} (Λ(n)/ln n) e^{2πiθn}|`
//!
//! plus the exact Abel-summation identity
//! `S_N = ℭ(N) ln N − Σ_{n=2}^{N−1} ℭ(n) ln((n+1)/n)`, whose numerical
//! residual is one of the crate's standing self-checks.
//!
//! Prefix sums advance the phase with the hi/lo recurrence (one step per
//! n); block sums seed the recurrence at the block start via the exact
//! product path. Accumulation is compensated throughout.

use num_complex::Complex64;
use serde::Serialize;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numeric::KahanComplex;
use crate::phase::PhaseGen;
use crate::prime_tables::LambdaTable;
use crate::theta::ThetaSample;

/// Default geometric checkpoint ratio 2^{1/4}; exponent fitting wants
/// log-spaced N.
pub const DEFAULT_GRID_RATIO: f64 = 1.189_207_115_002_721;
pub const DEFAULT_GRID_START: u64 = 100;

/// Checkpoint grid specification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GridSpec {
    /// start, start·r, start·r², ... capped at n_max (n_max always included).
    Geometric { start: u64, ratio: f64 },
    /// Explicit ascending checkpoints.
    Explicit(Vec<u64>),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Geometric { start: DEFAULT_GRID_START, ratio: DEFAULT_GRID_RATIO }
    }
}

impl GridSpec {
    /// Concrete ascending checkpoint list, first ≥ 2, last = n_max for the
    /// geometric form.
    pub fn materialize(&self, n_max: u64) -> Result<Vec<u64>> {
        match self {
            GridSpec::Geometric { start, ratio } => {
                if *start < 2 || !ratio.is_finite() || *ratio <= 1.0 {
                    return Err(Error::invalid(format!(
                        "geometric grid needs start >= 2 and ratio > 1, got start={start} ratio={ratio}"
                    )));
                }
                if n_max < *start {
                    return Err(Error::invalid(format!(
                        "n_max {n_max} below grid start {start}"
                    )));
                }
                let mut pts = Vec::new();
                let mut x = *start as f64;
                while x < n_max as f64 {
                    let n = x.round() as u64;
                    if pts.last() != Some(&n) {
                        pts.push(n);
                    }
                    x *= ratio;
                }
                if pts.last() != Some(&n_max) {
                    pts.push(n_max);
                }
                Ok(pts)
            }
            GridSpec::Explicit(pts) => {
                validate_grid(pts)?;
                if pts.last().copied().unwrap_or(0) > n_max {
                    return Err(Error::invalid("explicit grid exceeds n_max".to_string()));
                }
                Ok(pts.clone())
            }
        }
    }
}

fn validate_grid(grid: &[u64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("empty checkpoint grid".to_string()));
    }
    if grid[0] < 2 {
        return Err(Error::invalid("first checkpoint must be >= 2".to_string()));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid("checkpoints must be strictly increasing".to_string()));
    }
    Ok(())
}

/// Checkpointed prefix values of S_N and ℭ(N) along a grid.
#[derive(Debug, Clone, Serialize)]
pub struct SumTrace {
    pub theta: ThetaSample,
    pub checkpoints: Vec<u64>,
    pub s_values: Vec<Complex64>,
    pub c_values: Vec<Complex64>,
    /// |S_N| / (N^{1/2} (ln N)^{5/2}).
    pub normalized: Vec<f64>,
}

impl SumTrace {
    /// sup over the grid of the normalized statistic.
    pub fn sup_normalized(&self) -> f64 {
        self.normalized.iter().copied().fold(0.0, f64::max)
    }

    /// sup over the grid of |S_N| / N^{1/2+ε}; feeds the heuristic tail of
    /// the continued F-series.
    pub fn sup_ratio(&self, epsilon: f64) -> f64 {
        self.checkpoints
            .iter()
            .zip(&self.s_values)
            .map(|(&n, s)| s.norm() / (n as f64).powf(0.5 + epsilon))
            .fold(0.0, f64::max)
    }

    /// CSV rows `theta,N,re_S,im_S,abs_S,re_C,im_C,normalized` with a
    /// schema header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# schema=1\ntheta,N,re_S,im_S,abs_S,re_C,im_C,normalized\n");
        for (i, &n) in self.checkpoints.iter().enumerate() {
            let s = self.s_values[i];
            let c = self.c_values[i];
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.theta,
                n,
                s.re,
                s.im,
                s.norm(),
                c.re,
                c.im,
                self.normalized[i]
            );
        }
        out
    }
}

/// |S_N| / (N^{1/2} (ln N)^{5/2}).
#[inline]
pub fn normalized_statistic(n: u64, s_abs: f64) -> f64 {
    let nf = n as f64;
    s_abs / (nf.sqrt() * nf.ln().powf(2.5))
}

/// S_N(θ) = Σ_{n=2}^{N} Λ(n) e^{2πiθn}.
pub fn s_sum(n: u64, theta: &ThetaSample, table: &LambdaTable) -> Result<Complex64> {
    if n < 2 {
        return Err(Error::invalid(format!("s_sum needs N >= 2, got {n}")));
    }
    if n > table.limit() {
        return Err(Error::invalid(format!("N {n} exceeds table limit {}", table.limit())));
    }
    let mut gen = PhaseGen::new_at(theta, 2);
    let mut acc = KahanComplex::new();
    for k in 2..=n {
        if let Some(pp) = table.decompose_unchecked(k) {
            acc.add(pp.lambda() * gen.phase());
        }
        gen.step();
    }
    Ok(acc.sum())
}

/// ℭ(u) = Σ_{1<n≤u} (Λ(n)/ln n) e^{2πiθn}; ℭ(1) = 0.
pub fn c_sum(u: u64, theta: &ThetaSample, table: &LambdaTable) -> Result<Complex64> {
    if u < 1 {
        return Err(Error::invalid("c_sum needs u >= 1".to_string()));
    }
    if u > table.limit() {
        return Err(Error::invalid(format!("u {u} exceeds table limit {}", table.limit())));
    }
    if u == 1 {
        return Ok(Complex64::ZERO);
    }
    let mut gen = PhaseGen::new_at(theta, 2);
    let mut acc = KahanComplex::new();
    for k in 2..=u {
        if let Some(pp) = table.decompose_unchecked(k) {
            acc.add(pp.inv_m() * gen.phase());
        }
        gen.step();
    }
    Ok(acc.sum())
}

/// F(M, N, θ) = |Σ_{M<n≤M+N} (Λ(n)/ln n) e^{2πiθn}|; F(M, 0, θ) = 0.
pub fn block_f(m: u64, n: u64, theta: &ThetaSample, table: &LambdaTable) -> Result<f64> {
    let end = m
        .checked_add(n)
        .ok_or_else(|| Error::invalid("block range overflow".to_string()))?;
    if end > table.limit() {
        return Err(Error::invalid(format!(
            "block (M, M+N] = ({m}, {end}] exceeds table limit {}",
            table.limit()
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let start = (m + 1).max(2);
    if start > end {
        return Ok(0.0);
    }
    let mut gen = PhaseGen::new_at(theta, start);
    let mut acc = KahanComplex::new();
    for k in start..=end {
        if let Some(pp) = table.decompose_unchecked(k) {
            acc.add(pp.inv_m() * gen.phase());
        }
        gen.step();
    }
    Ok(acc.sum().norm())
}

/// Abel residual |S_N − [ℭ(N) ln N − Σ_{n=2}^{N−1} ℭ(n) ln((n+1)/n)]|.
///
/// The integral of the step function ℭ against d ln u is evaluated exactly
/// as the finite sum, so the residual is pure floating-point noise. S_N is
/// recomputed through its own kernel (Λ-weights) rather than shared with
/// the ℭ pass, keeping the two sides algebraically independent.
pub fn abel_residual(n: u64, theta: &ThetaSample, table: &LambdaTable) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid(format!("abel_residual needs N >= 2, got {n}")));
    }
    if n > table.limit() {
        return Err(Error::invalid(format!("N {n} exceeds table limit {}", table.limit())));
    }
    let s_direct = s_sum(n, theta, table)?;

    let mut gen = PhaseGen::new_at(theta, 2);
    let mut c_acc = KahanComplex::new();
    let mut bracket = KahanComplex::new();
    for k in 2..=n {
        if let Some(pp) = table.decompose_unchecked(k) {
            c_acc.add(pp.inv_m() * gen.phase());
        }
        if k < n {
            // ln((k+1)/k) without cancellation at large k
            let step = (1.0 / k as f64).ln_1p();
            bracket.add(c_acc.sum() * step);
        }
        gen.step();
    }
    let reconstructed = c_acc.sum() * (n as f64).ln() - bracket.sum();
    Ok((s_direct - reconstructed).norm())
}

/// One pass over n = 2..max(grid) emitting S, ℭ and the normalized
/// statistic at each checkpoint.
pub fn trace(theta: &ThetaSample, grid: &[u64], table: &LambdaTable) -> Result<SumTrace> {
    validate_grid(grid)?;
    let n_max = *grid.last().unwrap();
    if n_max > table.limit() {
        return Err(Error::invalid(format!(
            "grid end {n_max} exceeds table limit {}",
            table.limit()
        )));
    }
    let mut gen = PhaseGen::new_at(theta, 2);
    let mut s_acc = KahanComplex::new();
    let mut c_acc = KahanComplex::new();
    let mut s_values = Vec::with_capacity(grid.len());
    let mut c_values = Vec::with_capacity(grid.len());
    let mut normalized = Vec::with_capacity(grid.len());
    let mut next = 0usize;
    for k in 2..=n_max {
        if let Some(pp) = table.decompose_unchecked(k) {
            let phase = gen.phase();
            s_acc.add(pp.lambda() * phase);
            c_acc.add(pp.inv_m() * phase);
        }
        if grid[next] == k {
            let s = s_acc.sum();
            s_values.push(s);
            c_values.push(c_acc.sum());
            normalized.push(normalized_statistic(k, s.norm()));
            next += 1;
            if next == grid.len() {
                break;
            }
        }
        gen.step();
    }
    Ok(SumTrace {
        theta: *theta,
        checkpoints: grid.to_vec(),
        s_values,
        c_values,
        normalized,
    })
}
