//! Compensated accumulation and error-free float transforms.
//!
//! The exponential sums add up to ~10⁸ terms of magnitude ~ln N, so plain
//! `f64` accumulation loses digits we later assert on. All long sums in
//! this crate go through [`Kahan`] (Neumaier's variant) or its complex
//! counterpart.

use num_complex::Complex64;

/// Neumaier-compensated scalar sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    s: f64,
    c: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    #[inline]
    pub fn sum(&self) -> f64 {
        self.s + self.c
    }
}

/// Compensated complex sum (independent real/imaginary compensation).
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanComplex {
    re: Kahan,
    im: Kahan,
}

impl KahanComplex {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn sum(&self) -> Complex64 {
        Complex64::new(self.re.sum(), self.im.sum())
    }
}

/// Error-free sum: returns `(s, e)` with `s = fl(a + b)` and `a + b = s + e`
/// exactly (Knuth's branch-free version).
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let ap = s - b;
    let bp = s - ap;
    let da = a - ap;
    let db = b - bp;
    (s, da + db)
}

/// Error-free product via Dekker splitting: `a * b = p + e` exactly.
/// Avoids `mul_add`, which is emulated in software on targets without FMA.
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    const SPLIT: f64 = 134_217_729.0; // 2^27 + 1
    let p = a * b;
    let a_c = SPLIT * a;
    let a_hi = a_c - (a_c - a);
    let a_lo = a - a_hi;
    let b_c = SPLIT * b;
    let b_hi = b_c - (b_c - b);
    let b_lo = b - b_hi;
    let e = ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo;
    (p, e)
}
