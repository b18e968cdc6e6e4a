use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar used throughout the numerical core: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Relative machine precision used for tolerance scaling.
    fn eps() -> Self {
        <Self as Float>::epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma<T: Real>(x: T) -> T {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let xf = x.to_f64_lossy();
    if xf < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        let v = (pi / (pi * xf).sin()).ln() - ln_gamma(1.0 - xf);
        return T::lit(v);
    }
    // Stirling tail for large arguments keeps full precision where Lanczos
    // loses digits to cancellation in the log.
    if xf > 1e7 {
        let v = (xf - 0.5) * xf.ln() - xf + 0.5 * (2.0 * std::f64::consts::PI).ln()
            + 1.0 / (12.0 * xf)
            - 1.0 / (360.0 * xf * xf * xf);
        return T::lit(v);
    }
    let z = xf - 1.0;
    let mut a = COEF[0];
    let t = z + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (z + i as f64);
    }
    let v = 0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + a.ln();
    T::lit(v)
}

/// `ln Γ(a + b) − ln Γ(b)`, stable when `b` is huge relative to `a`.
pub fn ln_gamma_ratio<T: Real>(a: T, b: T) -> T {
    let (af, bf) = (a.to_f64_lossy(), b.to_f64_lossy());
    if bf > 1e6 && af.abs() < 1e3 {
        // asymptotic expansion of ln Γ(b + a) − ln Γ(b)
        let v = a_ln_ratio(af, bf);
        return T::lit(v);
    }
    ln_gamma(a + b) - ln_gamma(b)
}

fn a_ln_ratio(a: f64, b: f64) -> f64 {
    // ln Γ(b+a) − ln Γ(b) = a ln b + a(a−1)/(2b) − a(a−1)(2a−1)/(12 b²) + O(b⁻³)
    a * b.ln() + a * (a - 1.0) / (2.0 * b) - a * (a - 1.0) * (2.0 * a - 1.0) / (12.0 * b * b)
}
