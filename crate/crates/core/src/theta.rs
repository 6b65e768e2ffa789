//! Frequencies θ ∈ [0, 1) with provenance.
//!
//! The provenance matters operationally: rational samples are evaluated
//! through exact modular arithmetic (no float drift in the control rows),
//! and seeded samples record the `(seed, index)` address that reproduces
//! them.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    Explicit,
    Rational { a: u64, q: u64 },
    Seeded { seed: u64, index: u64 },
}

/// A frequency in [0, 1) plus how it came to be.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaSample {
    value: f64,
    provenance: Provenance,
}

impl ThetaSample {
    pub fn explicit(value: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&value) {
            return Err(Error::invalid(format!("theta {value} outside [0, 1)")));
        }
        Ok(Self { value, provenance: Provenance::Explicit })
    }

    pub fn rational(a: u64, q: u64) -> Result<Self> {
        if q == 0 || a >= q {
            return Err(Error::invalid(format!("rational theta needs 0 <= a < q, got {a}/{q}")));
        }
        Ok(Self { value: a as f64 / q as f64, provenance: Provenance::Rational { a, q } })
    }

    pub fn seeded(seed: u64, index: u64) -> Self {
        Self {
            value: rng::uniform_unit(seed, index),
            provenance: Provenance::Seeded { seed, index },
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `(a, q)` when the sample is rational.
    pub fn as_rational(&self) -> Option<(u64, u64)> {
        match self.provenance {
            Provenance::Rational { a, q } => Some((a, q)),
            _ => None,
        }
    }

    /// The sample 1 − θ (mod 1), used by conjugation-symmetry checks.
    /// Rational provenance is preserved exactly.
    pub fn reflected(&self) -> Self {
        match self.provenance {
            Provenance::Rational { a, q } if a > 0 => {
                Self { value: (q - a) as f64 / q as f64, provenance: Provenance::Rational { a: q - a, q } }
            }
            Provenance::Rational { .. } => *self, // θ = 0 reflects to itself mod 1
            _ => {
                let v = 1.0 - self.value;
                let value = if v >= 1.0 { 0.0 } else { v };
                Self { value, provenance: Provenance::Explicit }
            }
        }
    }
}

impl fmt::Display for ThetaSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.provenance {
            Provenance::Rational { a, q } => write!(f, "{a}/{q}"),
            _ => write!(f, "{}", self.value),
        }
    }
}

/// Parses "0.37" (explicit) or "2/5" (rational). Seeded samples are built
/// programmatically; the CLI handles its own "seed:k" spelling.
impl FromStr for ThetaSample {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some((a, q)) = s.split_once('/') {
            let a: u64 = a.trim().parse().map_err(|_| Error::invalid(format!("bad numerator in '{s}'")))?;
            let q: u64 = q.trim().parse().map_err(|_| Error::invalid(format!("bad denominator in '{s}'")))?;
            return ThetaSample::rational(a, q);
        }
        let v: f64 = s.trim().parse().map_err(|_| Error::invalid(format!("bad theta '{s}'")))?;
        ThetaSample::explicit(v)
    }
}
