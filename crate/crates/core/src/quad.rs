//! Adaptive composite Gauss–Legendre quadrature for complex-valued
//! integrands on real segments.
//!
//! Order-16 panels, bisected until the panel estimate (|whole − two
//! halves|) drops below the panel's share of the tolerance. Failures are
//! surfaced as errors carrying the offending segment, never smoothed over.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// 16-point Gauss–Legendre rule on [-1, 1]: positive abscissas and
/// weights (the rule is symmetric). Written with guard digits; the
/// compiler rounds them to the nearest f64.
#[allow(clippy::excessive_precision)]
const GL16_X: [f64; 8] = [
    0.095_012_509_837_637_440_185,
    0.281_603_550_779_258_913_230,
    0.458_016_777_657_227_386_342,
    0.617_876_244_402_643_748_447,
    0.755_404_408_355_003_033_895,
    0.865_631_202_387_831_743_880,
    0.944_575_023_073_232_576_078,
    0.989_400_934_991_649_932_596,
];
#[allow(clippy::excessive_precision)]
const GL16_W: [f64; 8] = [
    0.189_450_610_455_068_496_285,
    0.182_603_415_044_923_588_867,
    0.169_156_519_395_002_538_189,
    0.149_595_988_816_576_732_081,
    0.124_628_971_255_533_872_052,
    0.095_158_511_682_492_784_810,
    0.062_253_523_938_647_892_863,
    0.027_152_459_411_754_094_852,
];

/// Single 16-point panel over [a, b].
pub fn gl16<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Complex64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = Complex64::ZERO;
    for i in 0..8 {
        let dx = half * GL16_X[i];
        acc += GL16_W[i] * (f(mid + dx) + f(mid - dx));
    }
    half * acc
}

/// Result of an adaptive integration: the value and the accumulated error
/// estimate across accepted panels.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub panels: usize,
}

/// Integrates f over [a, b] to absolute tolerance `tol`, bisecting panels
/// up to `max_depth` times.
pub fn integrate<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("non-finite integration bounds".to_string()));
    }
    if a == b {
        return Ok(QuadResult { value: Complex64::ZERO, error_estimate: 0.0, panels: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let whole = gl16(f, lo, hi);
    let mut out = QuadResult { value: Complex64::ZERO, error_estimate: 0.0, panels: 0 };
    refine(f, lo, hi, whole, tol, max_depth, &mut out)?;
    out.value *= sign;
    Ok(out)
}

fn refine<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    whole: Complex64,
    tol: f64,
    depth_left: u32,
    out: &mut QuadResult,
) -> Result<()> {
    let mid = 0.5 * (a + b);
    let left = gl16(f, a, mid);
    let right = gl16(f, mid, b);
    let refined = left + right;
    let err = (refined - whole).norm();
    if err <= tol || err <= 1e-15 * refined.norm() {
        out.value += refined;
        out.error_estimate += err;
        out.panels += 2;
        return Ok(());
    }
    if depth_left == 0 {
        return Err(Error::Quadrature { a, b, estimate: err, tol });
    }
    refine(f, a, mid, left, 0.5 * tol, depth_left - 1, out)?;
    refine(f, mid, b, right, 0.5 * tol, depth_left - 1, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_for_degree_31_polynomials() {
        // ∫₀¹ x³¹ dx = 1/32, at the edge of GL16 exactness.
        let r = gl16(&|x| Complex64::new(x.powi(31), 0.0), 0.0, 1.0);
        assert_relative_eq!(r.re, 1.0 / 32.0, max_relative = 1e-13);
    }

    #[test]
    fn weights_sum_to_two() {
        let s: f64 = GL16_W.iter().sum::<f64>() * 2.0;
        assert_relative_eq!(s, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn oscillatory_complex_integrand() {
        // ∫₀^{10} e^{iωu} du = (e^{10iω} − 1)/(iω)
        let omega = 14.0;
        let f = |u: f64| Complex64::new(0.0, omega * u).exp();
        let r = integrate(&f, 0.0, 10.0, 1e-10, 40).unwrap();
        let exact = (Complex64::new(0.0, omega * 10.0).exp() - 1.0) / Complex64::new(0.0, omega);
        assert!((r.value - exact).norm() < 1e-9, "err {}", (r.value - exact).norm());
    }

    #[test]
    fn orientation_and_degenerate_interval() {
        let f = |x: f64| Complex64::new(x, 0.0);
        let fwd = integrate(&f, 0.0, 2.0, 1e-12, 30).unwrap().value;
        let back = integrate(&f, 2.0, 0.0, 1e-12, 30).unwrap().value;
        assert_relative_eq!(fwd.re, 2.0, max_relative = 1e-13);
        assert_relative_eq!(back.re, -2.0, max_relative = 1e-13);
        assert_eq!(integrate(&f, 1.0, 1.0, 1e-12, 30).unwrap().value, Complex64::ZERO);
    }

    #[test]
    fn surfaces_nonconvergence() {
        // |x|^{-0.9} is integrable but the bisection depth is capped low.
        let f = |x: f64| Complex64::new(x.abs().powf(-0.9), 0.0);
        let e = integrate(&f, 0.0, 1.0, 1e-12, 3).unwrap_err();
        assert!(matches!(e, Error::Quadrature { .. }));
    }
}
