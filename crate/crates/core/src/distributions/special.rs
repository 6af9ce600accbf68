//! Special functions: log-gamma, regularized incomplete gamma, and the
//! standard normal CDF/quantile.
//!
//! Everything is generic over [`Real`]; coefficients are `f64` literals.

use crate::scalar::{lit, Real};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma<T: Real>(x: T) -> T {
    let half = lit::<T>(0.5);
    if x < half {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = lit::<T>(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + lit::<T>(c) / (x + lit::<T>(i as f64));
    }
    let t = x + lit::<T>(LANCZOS_G) + half;
    half * (lit::<T>(2.0) * T::PI()).ln() + (x + half) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p<T: Real>(a: T, x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if x.is_infinite() {
        return T::one();
    }
    if x < a + T::one() {
        gamma_series(a, x)
    } else {
        T::one() - gamma_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`, accurate in the upper tail.
pub fn gamma_q<T: Real>(a: T, x: T) -> T {
    if x <= T::zero() {
        return T::one();
    }
    if x.is_infinite() {
        return T::zero();
    }
    if x < a + T::one() {
        T::one() - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn prefactor<T: Real>(a: T, x: T) -> T {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

fn gamma_series<T: Real>(a: T, x: T) -> T {
    let eps = T::epsilon();
    let mut ap = a;
    let mut del = T::one() / a;
    let mut sum = del;
    for _ in 0..10_000 {
        ap = ap + T::one();
        del = del * x / ap;
        sum = sum + del;
        if del.abs() < sum.abs() * eps {
            break;
        }
    }
    (sum * prefactor(a, x)).min(T::one())
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn gamma_continued_fraction<T: Real>(a: T, x: T) -> T {
    let eps = T::epsilon();
    let tiny = T::min_positive_value() / eps;
    let two = lit::<T>(2.0);
    let mut b = x + T::one() - a;
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    let mut i = T::one();
    for _ in 0..10_000 {
        let an = -i * (i - a);
        b = b + two;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let del = d * c;
        h = h * del;
        if (del - T::one()).abs() < eps {
            break;
        }
        i = i + T::one();
    }
    (h * prefactor(a, x)).min(T::one())
}

/// Standard normal density.
#[inline]
pub fn norm_pdf<T: Real>(z: T) -> T {
    (-(z * z) / lit(2.0)).exp() / (lit::<T>(2.0) * T::PI()).sqrt()
}

/// Log of the standard normal density.
#[inline]
pub fn norm_ln_pdf<T: Real>(z: T) -> T {
    -(z * z) / lit(2.0) - lit::<T>(0.5) * (lit::<T>(2.0) * T::PI()).ln()
}

/// Standard normal CDF. Relative accuracy is preserved in the lower tail.
pub fn norm_cdf<T: Real>(z: T) -> T {
    if z.is_nan() {
        return z;
    }
    let half = lit::<T>(0.5);
    let q = gamma_q(half, z * z * half);
    if z < T::zero() {
        half * q
    } else {
        T::one() - half * q
    }
}

/// Standard normal survival function `1 - Φ(z)`, accurate in the upper tail.
#[inline]
pub fn norm_sf<T: Real>(z: T) -> T {
    norm_cdf(-z)
}

const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

fn poly<T: Real>(coef: &[f64], x: T) -> T {
    coef.iter().fold(T::zero(), |acc, &c| acc * x + lit(c))
}

/// Standard normal quantile `Φ⁻¹(p)`. Returns `∓∞` at `p = 0` and `p = 1`.
pub fn norm_inv_cdf<T: Real>(p: T) -> T {
    if p.is_nan() {
        return p;
    }
    if p <= T::zero() {
        return T::neg_infinity();
    }
    if p >= T::one() {
        return T::infinity();
    }
    let half = lit::<T>(0.5);
    if p > half {
        // 1 - p is exact on [0.5, 1]
        return -norm_inv_cdf(T::one() - p);
    }
    let p_low = lit::<T>(0.024_25);
    let mut x = if p < p_low {
        let q = (lit::<T>(-2.0) * p.ln()).sqrt();
        poly(&ACKLAM_C, q) / (poly(&ACKLAM_D, q) * q + T::one())
    } else {
        let q = p - half;
        let r = q * q;
        poly(&ACKLAM_A, r) * q / (poly(&ACKLAM_B, r) * r + T::one())
    };
    // one Halley step against the accurate CDF
    let e = norm_cdf(x) - p;
    let u = e * (lit::<T>(2.0) * T::PI()).sqrt() * (x * x * half).exp();
    if u.is_finite() {
        x = x - u / (T::one() + x * u * half);
    }
    x
}
