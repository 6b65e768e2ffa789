//! Generation of the unit phases `e^{2πiθn}`.
//!
//! A naive `f64` recurrence for `frac(nθ)` drifts by about `n` ulps, which
//! at `n ~ 10⁸` already eats the digits the sum tests assert on. Two exact
//! routes are provided instead, both keeping the phase error below 1e-10
//! cycles up to `n = 10⁹`:
//!
//! * [`PhaseRecurrence`] — sequential: `frac(nθ)` carried in unevaluated
//!   hi/lo double-double form, renormalized every step. Used by the prefix
//!   sums, which visit every `n` anyway.
//! * [`frac_mul`] — random access: `frac(nθ)` from an error-free product
//!   `nθ = p + e`. Used for scattered terms (series coefficients, block
//!   starts).
//!
//! Rational θ = a/q bypasses floats entirely: the phase index `(a·n) mod q`
//! is exact integer arithmetic and the root of unity is looked up or
//! recomputed from the exact angle.

use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::numeric::{two_prod, two_sum};
use crate::theta::{Provenance, ThetaSample};

/// `e^{2πi·frac}` for a fractional part in `[0, 1)` (small excursions
/// outside are harmless: the exponential wraps).
#[inline]
pub fn unit_phase(frac: f64) -> Complex64 {
    let (s, c) = (TAU * frac).sin_cos();
    Complex64::new(c, s)
}

/// `frac(nθ)` through an error-free product. Exact reduction: `nθ = p + e`
/// with `p - floor(p)` exact by Sterbenz, so the only rounding is the final
/// addition of `e`.
#[inline]
pub fn frac_mul(n: u64, theta: f64) -> f64 {
    let (p, e) = two_prod(n as f64, theta);
    let mut f = (p - p.floor()) + e;
    if f >= 1.0 {
        f -= 1.0;
    } else if f < 0.0 {
        f += 1.0;
    }
    f
}

/// Double-double accumulator for `frac(nθ)`, advanced one `n` at a time.
#[derive(Debug, Clone, Copy)]
pub struct PhaseRecurrence {
    theta: f64,
    hi: f64,
    lo: f64,
}

impl PhaseRecurrence {
    /// Start positioned at `n0` (the accumulator holds `frac(n0·θ)`).
    pub fn new_at(theta: f64, n0: u64) -> Self {
        let (p, e) = two_prod(n0 as f64, theta);
        let f = p - p.floor();
        let (hi, lo) = two_sum(f, e);
        let mut rec = Self { theta, hi, lo };
        rec.wrap();
        rec
    }

    #[inline]
    fn wrap(&mut self) {
        if self.hi >= 1.0 {
            self.hi -= 1.0; // exact: hi ∈ [1, 2)
        } else if self.hi < 0.0 {
            self.hi += 1.0;
        }
    }

    /// Advance `n → n + 1`.
    #[inline]
    pub fn step(&mut self) {
        let (s, e) = two_sum(self.hi, self.theta);
        let lo = self.lo + e;
        let (hi, lo) = two_sum(s, lo);
        self.hi = hi;
        self.lo = lo;
        self.wrap();
    }

    /// Current fractional part.
    #[inline]
    pub fn frac(&self) -> f64 {
        let f = self.hi + self.lo;
        if f >= 1.0 {
            f - 1.0
        } else if f < 0.0 {
            f + 1.0
        } else {
            f
        }
    }

    #[inline]
    pub fn phase(&self) -> Complex64 {
        unit_phase(self.frac())
    }
}

/// Phase source for one θ, stepping `n → n + 1`, choosing the exact
/// rational path when the sample's provenance is a fraction.
pub enum PhaseGen {
    Irrational(PhaseRecurrence),
    Rational(RationalPhase),
}

impl PhaseGen {
    pub fn new_at(theta: &ThetaSample, n0: u64) -> Self {
        match theta.provenance() {
            Provenance::Rational { a, q } => {
                PhaseGen::Rational(RationalPhase::new_at(a, q, n0))
            }
            _ => PhaseGen::Irrational(PhaseRecurrence::new_at(theta.value(), n0)),
        }
    }

    #[inline]
    pub fn step(&mut self) {
        match self {
            PhaseGen::Irrational(r) => r.step(),
            PhaseGen::Rational(r) => r.step(),
        }
    }

    #[inline]
    pub fn phase(&self) -> Complex64 {
        match self {
            PhaseGen::Irrational(r) => r.phase(),
            PhaseGen::Rational(r) => r.phase(),
        }
    }
}

/// Random-access phase `e^{2πiθn}`, honoring rational provenance.
pub fn phase_at(theta: &ThetaSample, n: u64) -> Complex64 {
    match theta.provenance() {
        Provenance::Rational { a, q } => RationalPhase::phase_of(a, q, n),
        _ => unit_phase(frac_mul(n, theta.value())),
    }
}

/// Exact phases for θ = a/q: index arithmetic mod q, roots of unity from a
/// table when q is small enough to make one worthwhile.
pub struct RationalPhase {
    a: u64,
    q: u64,
    k: u64,
    roots: Option<Vec<Complex64>>,
}

const ROOT_TABLE_MAX_Q: u64 = 1 << 16;

impl RationalPhase {
    pub fn new_at(a: u64, q: u64, n0: u64) -> Self {
        let roots = (q <= ROOT_TABLE_MAX_Q)
            .then(|| (0..q).map(|k| unit_phase(k as f64 / q as f64)).collect());
        Self { a, q, k: Self::index(a, q, n0), roots }
    }

    #[inline]
    fn index(a: u64, q: u64, n: u64) -> u64 {
        ((a as u128 * n as u128) % q as u128) as u64
    }

    #[inline]
    pub fn step(&mut self) {
        self.k += self.a;
        if self.k >= self.q {
            self.k -= self.q;
        }
    }

    #[inline]
    pub fn phase(&self) -> Complex64 {
        match &self.roots {
            Some(t) => t[self.k as usize],
            None => unit_phase(self.k as f64 / self.q as f64),
        }
    }

    pub fn phase_of(a: u64, q: u64, n: u64) -> Complex64 {
        unit_phase(Self::index(a, q, n) as f64 / q as f64)
    }
}
