//! Exact integer-side tables: primes, von Mangoldt Λ(n), prime powers,
//! the completely additive ℓ(n) = Σ αᵢpᵢ, and Chebyshev ψ(u).
//!
//! One linear (smallest-prime-factor) sieve pass yields everything: spf
//! gives primality, the Λ-support decomposition n = p^m, and ℓ(n) by
//! repeated division. Λ is never stored as floats — `ln p` is computed on
//! demand from the exact `(p, m)` pair, so the integer side stays exact.

use serde::Serialize;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::numeric::Kahan;

/// Default memory budget for table construction (2 GiB).
pub const DEFAULT_MEMORY_BUDGET: u64 = 2 << 30;

/// A prime power n = p^m with m ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PrimePower {
    pub p: u64,
    pub m: u32,
    pub n: u64,
}

impl PrimePower {
    /// Λ(n) = ln p.
    #[inline]
    pub fn lambda(&self) -> f64 {
        (self.p as f64).ln()
    }

    /// Λ(n)/ln n = 1/m, exact as a reciprocal of the exponent.
    #[inline]
    pub fn inv_m(&self) -> f64 {
        1.0 / self.m as f64
    }
}

/// Sieved smallest-prime-factor table for 2 ≤ n ≤ limit, immutable after
/// construction and safe to share across threads.
pub struct LambdaTable {
    limit: u64,
    spf: Vec<u32>,
    primes: Vec<u32>,
    prime_powers: OnceLock<Vec<PrimePower>>,
}

impl LambdaTable {
    /// Builds the table with the default 2 GiB budget.
    pub fn build(limit: u64) -> Result<Self> {
        Self::build_with_budget(limit, DEFAULT_MEMORY_BUDGET)
    }

    /// Builds with an explicit memory budget in bytes. Exceeding the budget
    /// is an error, never a silent fallback.
    pub fn build_with_budget(limit: u64, budget: u64) -> Result<Self> {
        if limit < 2 {
            return Err(Error::invalid(format!("sieve limit must be >= 2, got {limit}")));
        }
        // spf array plus a generous π(limit) overestimate for the prime list.
        let pi_bound = (1.3 * limit as f64 / (limit as f64).ln()).ceil() as u64 + 16;
        let required = 4 * (limit + 1) + 4 * pi_bound;
        if required > budget {
            return Err(Error::ResourceLimit(format!(
                "sieve to {limit} needs ~{required} bytes, budget is {budget}"
            )));
        }

        let n = limit as usize;
        let mut spf = vec![0u32; n + 1];
        let mut primes: Vec<u32> = Vec::with_capacity(pi_bound as usize);
        for i in 2..=n {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                if p > si || (p as usize) * i > n {
                    break;
                }
                spf[p as usize * i] = p;
            }
        }
        Ok(Self { limit, spf, primes, prime_powers: OnceLock::new() })
    }

    #[inline]
    pub fn limit(&self) -> u64 {
        self.limit
    }

    fn check_range(&self, n: u64) -> Result<()> {
        if n > self.limit {
            return Err(Error::invalid(format!("{n} exceeds table limit {}", self.limit)));
        }
        Ok(())
    }

    /// Smallest prime factor of n (2 ≤ n ≤ limit).
    pub fn spf(&self, n: u64) -> Result<u64> {
        if n < 2 {
            return Err(Error::invalid(format!("spf undefined for {n}")));
        }
        self.check_range(n)?;
        Ok(self.spf[n as usize] as u64)
    }

    #[inline]
    pub fn is_prime(&self, n: u64) -> bool {
        n >= 2 && n <= self.limit && self.spf[n as usize] as u64 == n
    }

    /// The (p, m) decomposition when n = p^m, i.e. the support of Λ.
    /// Unchecked fast path: n must satisfy 2 ≤ n ≤ limit.
    #[inline]
    pub(crate) fn decompose_unchecked(&self, n: u64) -> Option<PrimePower> {
        let p = self.spf[n as usize] as u64;
        let mut rest = n / p;
        let mut m = 1u32;
        while rest > 1 {
            if self.spf[rest as usize] as u64 != p {
                return None;
            }
            rest /= p;
            m += 1;
        }
        Some(PrimePower { p, m, n })
    }

    /// The (p, m) pair with n = p^m when Λ(n) ≠ 0.
    pub fn prime_power(&self, n: u64) -> Result<Option<PrimePower>> {
        self.check_range(n)?;
        if n < 2 {
            return Ok(None); // Λ(1) = 0
        }
        Ok(self.decompose_unchecked(n))
    }

    /// Von Mangoldt Λ(n): ln p when n = p^m, else 0. Λ(1) = 0.
    pub fn lambda(&self, n: u64) -> Result<f64> {
        Ok(self.prime_power(n)?.map_or(0.0, |pp| pp.lambda()))
    }

    /// ℓ(n) = Σ αᵢpᵢ, the sum of prime factors with multiplicity; ℓ(1) = 0.
    pub fn sopfr(&self, n: u64) -> Result<u64> {
        if n < 1 {
            return Err(Error::invalid("sopfr needs n >= 1".to_string()));
        }
        self.check_range(n)?;
        let mut rest = n;
        let mut sum = 0u64;
        while rest > 1 {
            let p = self.spf[rest as usize] as u64;
            sum += p;
            rest /= p;
        }
        Ok(sum)
    }

    /// Chebyshev ψ(u) = Σ_{n ≤ u} Λ(n), compensated accumulation in
    /// ascending-n order.
    pub fn chebyshev_psi(&self, u: u64) -> Result<f64> {
        self.check_range(u)?;
        let pps = self.prime_powers();
        let end = pps.partition_point(|pp| pp.n <= u);
        let mut acc = Kahan::new();
        for pp in &pps[..end] {
            acc.add(pp.lambda());
        }
        Ok(acc.sum())
    }

    /// All prime powers p^m in (m_start, m_start + len], ascending.
    pub fn prime_powers_in(&self, m_start: u64, len: u64) -> Result<Vec<PrimePower>> {
        let end = m_start
            .checked_add(len)
            .ok_or_else(|| Error::invalid("range overflow".to_string()))?;
        self.check_range(end)?;
        let mut out = Vec::new();
        for n in m_start + 1..=end {
            if n < 2 {
                continue;
            }
            if let Some(pp) = self.decompose_unchecked(n) {
                out.push(pp);
            }
        }
        Ok(out)
    }

    /// The full ascending prime-power list up to the table limit, built
    /// lazily once and shared.
    pub fn prime_powers(&self) -> &[PrimePower] {
        self.prime_powers.get_or_init(|| {
            self.prime_powers_in(0, self.limit)
                .expect("full range is always valid")
        })
    }

    /// Primes up to the limit, ascending.
    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    /// π(x): number of primes ≤ x.
    pub fn prime_count(&self, x: u64) -> Result<u64> {
        self.check_range(x)?;
        Ok(self.primes.partition_point(|&p| p as u64 <= x) as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Trial-division Λ, independent of the sieve.
    fn lambda_trial(n: u64) -> f64 {
        if n < 2 {
            return 0.0;
        }
        let mut rest = n;
        let mut p = 0u64;
        let mut d = 2u64;
        while d * d <= rest {
            if rest.is_multiple_of(d) {
                p = d;
                while rest.is_multiple_of(d) {
                    rest /= d;
                }
                break;
            }
            d += 1;
        }
        if p == 0 {
            return (n as f64).ln(); // n prime
        }
        if rest == 1 {
            (p as f64).ln()
        } else {
            0.0
        }
    }

    fn table() -> LambdaTable {
        LambdaTable::build(100_000).unwrap()
    }

    #[test]
    fn lambda_definition_examples() {
        let t = table();
        let pp = t.prime_power(8).unwrap().unwrap();
        assert_eq!((pp.p, pp.m), (2, 3));
        assert_relative_eq!(t.lambda(8).unwrap(), 2f64.ln(), max_relative = 1e-15);
        assert_eq!(t.lambda(12).unwrap(), 0.0);
        assert_eq!(t.lambda(1).unwrap(), 0.0);
    }

    #[test]
    fn sopfr_examples() {
        let t = table();
        assert_eq!(t.sopfr(12).unwrap(), 7);
        assert_eq!(t.sopfr(1).unwrap(), 0);
        assert_eq!(t.sopfr(7).unwrap(), 7);
    }

    #[test]
    fn psi_examples() {
        let t = table();
        assert_eq!(t.chebyshev_psi(1).unwrap(), 0.0);
        assert_relative_eq!(t.chebyshev_psi(2).unwrap(), 2f64.ln(), max_relative = 1e-15);
        // Oracle: direct summation of Λ(n) for n ≤ 10 gives ln 2520.
        let direct: f64 = (2..=10).map(lambda_trial).sum();
        assert_relative_eq!(direct, 2520f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(t.chebyshev_psi(10).unwrap(), direct, max_relative = 1e-12);
    }

    #[test]
    fn prime_powers_ranges() {
        let t = table();
        let ns: Vec<u64> = t.prime_powers_in(0, 10).unwrap().iter().map(|pp| pp.n).collect();
        assert_eq!(ns, vec![2, 3, 4, 5, 7, 8, 9]);
        assert!(t.prime_powers_in(0, 0).unwrap().is_empty());
        let ns: Vec<u64> = t.prime_powers_in(8, 2).unwrap().iter().map(|pp| pp.n).collect();
        assert_eq!(ns, vec![9]);
        assert!(t.prime_powers_in(0, t.limit() + 1).is_err());
    }

    #[test]
    fn lambda_matches_trial_division_on_sample() {
        let t = table();
        // Full range is swept in the acceptance suite; spot-check densely here.
        for n in 1..=2000u64 {
            assert_eq!(t.lambda(n).unwrap(), lambda_trial(n), "n = {n}");
        }
        for k in 0..500u64 {
            let n = 2 + crate::rng::uniform_below(17, k, t.limit() - 2);
            assert_eq!(t.lambda(n).unwrap(), lambda_trial(n), "n = {n}");
        }
    }

    #[test]
    fn sopfr_is_completely_additive() {
        let t = table();
        for k in 0..2000u64 {
            let a = 1 + crate::rng::uniform_below(5, 2 * k, 316);
            let b = 1 + crate::rng::uniform_below(5, 2 * k + 1, 316);
            assert_eq!(
                t.sopfr(a * b).unwrap(),
                t.sopfr(a).unwrap() + t.sopfr(b).unwrap(),
                "a = {a}, b = {b}"
            );
        }
    }

    #[test]
    fn psi_equals_prime_power_log_sum_bitwise() {
        let t = table();
        for u in [10u64, 100, 1234, 100_000] {
            let mut acc = Kahan::new();
            for pp in t.prime_powers_in(0, u).unwrap() {
                acc.add(pp.lambda());
            }
            assert_eq!(t.chebyshev_psi(u).unwrap(), acc.sum());
        }
    }

    #[test]
    fn pi_and_psi_reference_values() {
        let t = table();
        assert_eq!(t.prime_count(100).unwrap(), 25);
        assert_eq!(t.prime_count(100_000).unwrap(), 9592);
        // ψ(100) = 94.0453... (direct Λ-sum oracle agrees by construction).
        assert_relative_eq!(t.chebyshev_psi(100).unwrap(), 94.04531122, epsilon = 1e-6);
    }

    #[test]
    fn psi_tracks_n_at_pnt_scale() {
        let t = LambdaTable::build(10_000_000).unwrap();
        for n in [1_000_000u64, 3_000_000, 10_000_000] {
            let ratio = t.chebyshev_psi(n).unwrap() / n as f64;
            assert!((0.97..=1.03).contains(&ratio), "psi({n})/{n} = {ratio}");
        }
    }

    #[test]
    fn construction_error_paths() {
        assert!(matches!(LambdaTable::build(1), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            LambdaTable::build_with_budget(1 << 30, 1 << 20),
            Err(Error::ResourceLimit(_))
        ));
        let t = table();
        assert!(t.lambda(t.limit() + 1).is_err());
        assert!(t.sopfr(0).is_err());
        assert!(t.chebyshev_psi(t.limit() + 1).is_err());
    }
}
