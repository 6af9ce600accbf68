//! Sampling primitives: moment-parameterized marginals, Latin hypercube
//! designs, and a bivariate Gaussian copula with conditional sampling.
//!
//! Quantiles are available both from a uniform (`quantile`) and from a
//! standard-normal latent value (`from_latent`). The latent route keeps full
//! precision in the upper tail, which matters once the copula pushes a draw
//! past `Φ(z) ≈ 1`.

mod copula;
mod lhs;
pub mod special;

pub use copula::CopulaSpec;
pub use lhs::{lhs_sample, substream_seed, LhsMatrix};

use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, Real};
use special::{gamma_p, gamma_q, ln_gamma, norm_cdf, norm_inv_cdf, norm_ln_pdf, norm_pdf};

/// Converts a natural-scale mean and standard deviation into the log-scale
/// location and scale of the matching log-normal law.
pub fn lognormal_from_moments<T: Real>(mean: T, sd: T) -> Result<(T, T)> {
    if !(mean > T::zero()) || !(sd > T::zero()) {
        return Err(invalid(format!(
            "log-normal moments need mean > 0 and sd > 0, got mean={mean}, sd={sd}"
        )));
    }
    let ratio = sd / mean;
    let sigma_log = (ratio * ratio).ln_1p().sqrt();
    let mu_log = mean.ln() - sigma_log * sigma_log / lit(2.0);
    Ok((mu_log, sigma_log))
}

/// A univariate marginal law.
///
/// `LogNormal` is stored on the log scale; build it from natural-scale
/// moments with [`MarginalSpec::lognormal`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginalSpec<T> {
    Normal { mean: T, sd: T },
    LogNormal { mu_log: T, sigma_log: T },
    /// Shape–scale convention: mean `shape·scale`, variance `shape·scale²`.
    Gamma { shape: T, scale: T },
    /// Normal with the given pre-truncation mean and sd, restricted to `[0, ∞)`.
    TruncatedNormalNonNeg { mean: T, sd: T },
}

impl<T: Real> MarginalSpec<T> {
    pub fn normal(mean: T, sd: T) -> Result<Self> {
        positive("normal sd", sd)?;
        finite("normal mean", mean)?;
        Ok(Self::Normal { mean, sd })
    }

    /// Log-normal with natural-scale `mean` and `sd`.
    pub fn lognormal(mean: T, sd: T) -> Result<Self> {
        let (mu_log, sigma_log) = lognormal_from_moments(mean, sd)?;
        Ok(Self::LogNormal { mu_log, sigma_log })
    }

    pub fn gamma(shape: T, scale: T) -> Result<Self> {
        positive("gamma shape", shape)?;
        positive("gamma scale", scale)?;
        Ok(Self::Gamma { shape, scale })
    }

    pub fn truncated_normal_non_neg(mean: T, sd: T) -> Result<Self> {
        positive("truncated normal sd", sd)?;
        finite("truncated normal mean", mean)?;
        Ok(Self::TruncatedNormalNonNeg { mean, sd })
    }

    pub fn mean(&self) -> T {
        match *self {
            Self::Normal { mean, .. } => mean,
            Self::LogNormal { mu_log, sigma_log } => (mu_log + sigma_log * sigma_log / lit(2.0)).exp(),
            Self::Gamma { shape, scale } => shape * scale,
            Self::TruncatedNormalNonNeg { mean, sd } => {
                let a = -mean / sd;
                mean + sd * norm_pdf(a) / norm_cdf(-a)
            }
        }
    }

    /// Lower bound of the support.
    pub fn support_min(&self) -> T {
        match self {
            Self::Normal { .. } => T::neg_infinity(),
            _ => T::zero(),
        }
    }

    /// Inverse CDF at `u ∈ (0, 1)`.
    pub fn quantile(&self, u: T) -> Result<T> {
        if !(u > T::zero() && u < T::one()) {
            return Err(Error::Domain {
                value: u.to_f64().unwrap_or(f64::NAN),
                domain: "(0, 1)",
            });
        }
        Ok(match *self {
            Self::Gamma { shape, scale } => scale * gamma_std_quantile(shape, u, T::one() - u),
            Self::TruncatedNormalNonNeg { mean, sd } => {
                truncated_quantile(mean, sd, u, T::one() - u)
            }
            _ => self.from_latent(norm_inv_cdf(u)),
        })
    }

    /// `F⁻¹(Φ(z))`, evaluated without forming `Φ(z)` where the family allows.
    pub fn from_latent(&self, z: T) -> T {
        match *self {
            Self::Normal { mean, sd } => mean + sd * z,
            Self::LogNormal { mu_log, sigma_log } => (mu_log + sigma_log * z).exp(),
            Self::Gamma { shape, scale } => {
                let (p, q) = split_tail(z);
                scale * gamma_std_quantile(shape, p, q)
            }
            Self::TruncatedNormalNonNeg { mean, sd } => {
                let (p, q) = split_tail(z);
                truncated_quantile(mean, sd, p, q)
            }
        }
    }

    pub fn cdf(&self, x: T) -> T {
        match *self {
            Self::Normal { mean, sd } => norm_cdf((x - mean) / sd),
            Self::LogNormal { mu_log, sigma_log } => {
                if x <= T::zero() {
                    T::zero()
                } else {
                    norm_cdf((x.ln() - mu_log) / sigma_log)
                }
            }
            Self::Gamma { shape, scale } => gamma_p(shape, x / scale),
            Self::TruncatedNormalNonNeg { mean, sd } => {
                if x <= T::zero() {
                    T::zero()
                } else {
                    let lo = norm_cdf(-mean / sd);
                    (norm_cdf((x - mean) / sd) - lo) / (T::one() - lo)
                }
            }
        }
    }

    /// Standard-normal score of `x`, i.e. `Φ⁻¹(F(x))`, computed through the
    /// upper tail when `F(x) > 1/2`.
    ///
    /// Fails when `F(x)` is exactly 0 or 1, where conditioning on `x` carries
    /// no usable latent value.
    pub fn latent(&self, x: T) -> Result<T> {
        let z = match *self {
            Self::Normal { mean, sd } => (x - mean) / sd,
            Self::LogNormal { mu_log, sigma_log } => {
                if x <= T::zero() {
                    T::neg_infinity()
                } else {
                    (x.ln() - mu_log) / sigma_log
                }
            }
            Self::Gamma { shape, scale } => {
                let p = gamma_p(shape, x / scale);
                if p <= lit(0.5) {
                    norm_inv_cdf(p)
                } else {
                    -norm_inv_cdf(gamma_q(shape, x / scale))
                }
            }
            Self::TruncatedNormalNonNeg { .. } => norm_inv_cdf(self.cdf(x)),
        };
        if z.is_finite() {
            Ok(z)
        } else {
            Err(Error::DegenerateConditioning {
                value: x.to_f64().unwrap_or(f64::NAN),
                cdf: if z > T::zero() { 1.0 } else { 0.0 },
            })
        }
    }

    /// Log density; `-∞` outside the support.
    pub fn ln_pdf(&self, x: T) -> T {
        match *self {
            Self::Normal { mean, sd } => norm_ln_pdf((x - mean) / sd) - sd.ln(),
            Self::LogNormal { mu_log, sigma_log } => {
                if x <= T::zero() {
                    T::neg_infinity()
                } else {
                    let lx = x.ln();
                    norm_ln_pdf((lx - mu_log) / sigma_log) - sigma_log.ln() - lx
                }
            }
            Self::Gamma { shape, scale } => {
                if x < T::zero() {
                    return T::neg_infinity();
                }
                if x == T::zero() {
                    return if shape < T::one() {
                        T::infinity()
                    } else if shape == T::one() {
                        -scale.ln()
                    } else {
                        T::neg_infinity()
                    };
                }
                (shape - T::one()) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
            }
            Self::TruncatedNormalNonNeg { mean, sd } => {
                if x < T::zero() {
                    T::neg_infinity()
                } else {
                    norm_ln_pdf((x - mean) / sd) - sd.ln() - norm_cdf(mean / sd).ln()
                }
            }
        }
    }
}

fn positive<T: Real>(what: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be positive and finite, got {v}")))
    }
}

fn finite<T: Real>(what: &str, v: T) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be finite, got {v}")))
    }
}

// (Φ(z), 1 - Φ(z)) with each side computed in its accurate tail.
fn split_tail<T: Real>(z: T) -> (T, T) {
    if z <= T::zero() {
        let p = norm_cdf(z);
        (p, T::one() - p)
    } else {
        let q = norm_cdf(-z);
        (T::one() - q, q)
    }
}

fn truncated_quantile<T: Real>(mean: T, sd: T, p: T, q: T) -> T {
    // mass of the untruncated normal on [0, ∞)
    let kept = norm_cdf(mean / sd);
    let x = if kept <= T::zero() {
        // far tail: the truncated law is exponential with rate |mean|/sd²
        -q.ln() * sd * sd / mean.abs()
    } else if mean < T::zero() {
        // target the survival function, which stays representable
        mean - sd * norm_inv_cdf(q * kept)
    } else if p <= lit(0.5) {
        let lo = norm_cdf(-mean / sd);
        mean + sd * norm_inv_cdf(lo + p * kept)
    } else {
        mean - sd * norm_inv_cdf(q * kept)
    };
    x.max(T::zero())
}

/// Quantile of the unit-scale gamma law with shape `a`.
///
/// `p` and `q = 1 - p` are both supplied so the upper tail can be targeted
/// through `Q(a, x)` without cancellation. Safeguarded Newton iteration on
/// `ln x`, falling back to bisection whenever a step leaves the bracket.
pub(crate) fn gamma_std_quantile<T: Real>(a: T, p: T, q: T) -> T {
    if p <= T::zero() {
        return T::zero();
    }
    if q <= T::zero() {
        return T::infinity();
    }
    let upper = p > lit(0.5);
    let residual = |t: T| -> T {
        let x = t.exp();
        if upper {
            q - gamma_q(a, x)
        } else {
            gamma_p(a, x) - p
        }
    };
    let log_norm = ln_gamma(a);
    let slope = |t: T| -> T { (a * t - t.exp() - log_norm).exp() };

    let mut lo = T::min_positive_value().ln();
    if residual(lo) >= T::zero() {
        return T::zero();
    }
    let mut hi = (a.max(T::one()) * lit(100.0) + lit(100.0)).ln();
    let mut guard = 0;
    while residual(hi) < T::zero() && guard < 64 {
        lo = hi;
        hi = hi + lit(2.0);
        guard += 1;
    }

    let mut t = initial_gamma_guess(a, p, q).ln();
    if !(t > lo && t < hi) {
        t = (lo + hi) / lit(2.0);
    }
    let tol = T::epsilon() * lit(8.0);
    for _ in 0..200 {
        let r = residual(t);
        if r == T::zero() {
            break;
        }
        if r > T::zero() {
            hi = t;
        } else {
            lo = t;
        }
        let d = slope(t);
        let mut next = t - r / d;
        if !(next.is_finite() && next > lo && next < hi) {
            next = (lo + hi) / lit(2.0);
        }
        let step = (next - t).abs();
        t = next;
        if step <= tol * (T::one() + t.abs()) || hi - lo <= tol * (T::one() + t.abs()) {
            break;
        }
    }
    t.exp()
}

fn initial_gamma_guess<T: Real>(a: T, p: T, q: T) -> T {
    // Wilson–Hilferty, or the small-x series leading term when that is negative
    let z = if p <= lit(0.5) { norm_inv_cdf(p) } else { -norm_inv_cdf(q) };
    let nine_a = lit::<T>(9.0) * a;
    let c = T::one() - T::one() / nine_a + z / nine_a.sqrt();
    let wh = a * c * c * c;
    if wh > T::zero() && a > lit(0.5) {
        wh
    } else {
        ((p.ln() + ln_gamma(a + T::one())) / a).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn lognormal_moments_examples() {
        let (mu, s) = lognormal_from_moments(10.0, 3.0).unwrap();
        assert_relative_eq!(s, 0.293_560_379_208_523_9, max_relative = 1e-13);
        assert_relative_eq!(mu, 2.259_496_244_873_519_5, max_relative = 1e-13);

        let (mu, s) = lognormal_from_moments(6.0, 3.0).unwrap();
        assert_relative_eq!(s, 0.472_380_727_077_438_8, max_relative = 1e-13);
        assert_relative_eq!(mu, 1.680_187_693_570_950_1, max_relative = 1e-13);

        let (mu, s) = lognormal_from_moments(1.0_f64, 1e-6).unwrap();
        assert_relative_eq!(s, 1e-6, max_relative = 1e-9);
        assert!(mu.abs() < 1e-12);
    }

    #[test]
    fn lognormal_moments_reject_non_positive() {
        assert!(lognormal_from_moments(0.0, 1.0).is_err());
        assert!(lognormal_from_moments(1.0, 0.0).is_err());
        assert!(lognormal_from_moments(-2.0, 1.0).is_err());
        assert!(MarginalSpec::lognormal(0.0_f64, 1.0).is_err());
    }

    #[test]
    fn quantile_examples() {
        let n = MarginalSpec::normal(50.0, 5.0).unwrap();
        assert_eq!(n.quantile(0.5).unwrap(), 50.0);

        let g = MarginalSpec::gamma(2.0, 0.5).unwrap();
        assert_relative_eq!(g.quantile(0.5).unwrap(), 0.839_173_495_008_330_3, max_relative = 1e-12);

        let t = MarginalSpec::truncated_normal_non_neg(2.0, 0.5).unwrap();
        let x = t.quantile(1e-6).unwrap();
        assert!(x >= 0.0);
        assert_relative_eq!(x, 0.003_681_249_989_504_716, max_relative = 1e-6);
    }

    #[test]
    fn quantile_reference_values() {
        let cases: [(MarginalSpec<f64>, f64, f64); 4] = [
            (MarginalSpec::gamma(0.3, 2.0).unwrap(), 0.7, 0.513_129_826_642_104_2),
            (MarginalSpec::gamma(5.0, 1.5).unwrap(), 0.01, 1.918_659_120_140_404_6),
            (MarginalSpec::gamma(0.05, 1.0).unwrap(), 0.2, 6.128_540_904_101_284e-15),
            (
                MarginalSpec::truncated_normal_non_neg(0.5, 0.5).unwrap(),
                0.3,
                0.387_588_746_050_668_9,
            ),
        ];
        for (spec, u, want) in cases {
            assert_relative_eq!(spec.quantile(u).unwrap(), want, max_relative = 1e-10);
        }
    }

    #[test]
    fn quantile_rejects_closed_interval() {
        let n = MarginalSpec::normal(0.0, 1.0).unwrap();
        assert!(matches!(n.quantile(0.0), Err(Error::Domain { .. })));
        assert!(matches!(n.quantile(1.0), Err(Error::Domain { .. })));
        assert!(n.quantile(f64::NAN).is_err());
    }

    #[test]
    fn truncated_mean_matches_closed_form() {
        let t = MarginalSpec::truncated_normal_non_neg(0.5_f64, 0.5).unwrap();
        assert_relative_eq!(t.mean(), 0.643_799_985_469_589_2, max_relative = 1e-12);
    }

    #[test]
    fn latent_round_trips_through_upper_tail() {
        let g = MarginalSpec::gamma(2.0_f64, 0.5).unwrap();
        for z in [-6.0, -1.0, 0.0, 2.5, 7.0] {
            let x = g.from_latent(z);
            assert_relative_eq!(g.latent(x).unwrap(), z, epsilon = 1e-8, max_relative = 1e-8);
        }
        assert!(matches!(g.latent(0.0), Err(Error::DegenerateConditioning { .. })));
    }

    #[test]
    fn densities_integrate_to_cdf_differences() {
        // trapezoid over [a, b] against F(b) - F(a)
        let specs = [
            MarginalSpec::gamma(2.0_f64, 0.5).unwrap(),
            MarginalSpec::lognormal(400.0, 10.0).unwrap(),
            MarginalSpec::truncated_normal_non_neg(0.5, 0.5).unwrap(),
        ];
        for spec in specs {
            let a = spec.quantile(0.1).unwrap();
            let b = spec.quantile(0.8).unwrap();
            let n = 20_000;
            let h = (b - a) / n as f64;
            let mut s = 0.0;
            for i in 0..=n {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                s += w * spec.ln_pdf(a + h * i as f64).exp();
            }
            assert_relative_eq!(s * h, 0.7, max_relative = 1e-6);
        }
    }

    proptest! {
        #[test]
        fn quantile_is_monotone_and_in_support(u1 in 1e-9..0.999_999_f64, u2 in 1e-9..0.999_999_f64,
                                               shape in 0.05..8.0_f64, scale in 0.01..5.0_f64) {
            let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
            for spec in [
                MarginalSpec::gamma(shape, scale).unwrap(),
                MarginalSpec::truncated_normal_non_neg(shape - 2.0, scale).unwrap(),
                MarginalSpec::lognormal(shape, scale).unwrap(),
            ] {
                let a = spec.quantile(lo).unwrap();
                let b = spec.quantile(hi).unwrap();
                prop_assert!(a >= 0.0 && b >= a, "{spec:?}: q({lo})={a} q({hi})={b}");
            }
        }

        #[test]
        fn gamma_quantile_inverts_cdf(u in 1e-6..0.999_999_f64, shape in 0.2..10.0_f64) {
            let spec = MarginalSpec::gamma(shape, 1.0).unwrap();
            let x = spec.quantile(u).unwrap();
            prop_assert!((spec.cdf(x) - u).abs() < 1e-10);
        }
    }
}
