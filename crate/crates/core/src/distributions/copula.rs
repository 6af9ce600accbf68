use super::special::norm_inv_cdf;
use super::MarginalSpec;
use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, Real};

/// Gaussian copula: marginals coupled through a correlated latent normal vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaSpec<T> {
    marginals: Vec<MarginalSpec<T>>,
    corr: Vec<T>,
    chol: Vec<T>,
}

impl<T: Real> CopulaSpec<T> {
    /// `corr` is the row-major latent correlation matrix.
    pub fn new(marginals: Vec<MarginalSpec<T>>, corr: Vec<T>) -> Result<Self> {
        let d = marginals.len();
        if d == 0 {
            return Err(invalid("copula needs at least one marginal"));
        }
        if corr.len() != d * d {
            return Err(invalid(format!("correlation matrix must be {d}×{d}")));
        }
        let tol = lit::<T>(1e-12);
        for i in 0..d {
            if (corr[i * d + i] - T::one()).abs() > tol {
                return Err(invalid("correlation matrix must have a unit diagonal"));
            }
            for j in 0..i {
                let c = corr[i * d + j];
                if (c - corr[j * d + i]).abs() > tol {
                    return Err(invalid("correlation matrix must be symmetric"));
                }
                if !(c.abs() < T::one()) {
                    return Err(invalid(format!("correlation {c} out of range (-1, 1)")));
                }
            }
        }
        let chol = cholesky(&corr, d)?;
        Ok(Self { marginals, corr, chol })
    }

    pub fn bivariate(first: MarginalSpec<T>, second: MarginalSpec<T>, rho: T) -> Result<Self> {
        Self::new(vec![first, second], vec![T::one(), rho, rho, T::one()])
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[MarginalSpec<T>] {
        &self.marginals
    }

    /// Off-diagonal latent correlation of a bivariate copula.
    pub fn rho(&self) -> T {
        assert_eq!(self.dim(), 2, "rho() is defined for bivariate copulas");
        self.corr[1]
    }

    /// Maps independent standard normals to correlated latent normals.
    pub fn correlate(&self, independent: &[T]) -> Vec<T> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..=i).fold(T::zero(), |acc, k| acc + self.chol[i * d + k] * independent[k]))
            .collect()
    }

    /// Draws one joint sample from one uniform per dimension.
    pub fn sample(&self, uniforms: &[T]) -> Result<Vec<T>> {
        if uniforms.len() != self.dim() {
            return Err(invalid(format!(
                "copula of dimension {} needs {} uniforms, got {}",
                self.dim(),
                self.dim(),
                uniforms.len()
            )));
        }
        let mut z = Vec::with_capacity(uniforms.len());
        for &u in uniforms {
            if !(u > T::zero() && u < T::one()) {
                return Err(Error::Domain { value: u.to_f64().unwrap_or(f64::NAN), domain: "(0, 1)" });
            }
            z.push(norm_inv_cdf(u));
        }
        Ok(self.sample_latent(&z))
    }

    /// Like [`sample`](Self::sample) but from independent standard normals.
    pub fn sample_latent(&self, independent: &[T]) -> Vec<T> {
        self.correlate(independent)
            .into_iter()
            .zip(&self.marginals)
            .map(|(z, m)| m.from_latent(z))
            .collect()
    }

    /// Draws the other coordinate of a bivariate copula given one observed
    /// coordinate, using `u` for the residual latent noise.
    pub fn conditional_sample(&self, observed_index: usize, observed_value: T, u: T) -> Result<T> {
        if !(u > T::zero() && u < T::one()) {
            return Err(Error::Domain { value: u.to_f64().unwrap_or(f64::NAN), domain: "(0, 1)" });
        }
        self.conditional_from_noise(observed_index, observed_value, norm_inv_cdf(u))
    }

    /// [`conditional_sample`](Self::conditional_sample) with the residual
    /// noise already on the standard-normal scale.
    pub fn conditional_from_noise(&self, observed_index: usize, observed_value: T, noise: T) -> Result<T> {
        if self.dim() != 2 || observed_index > 1 {
            return Err(invalid("conditional sampling is defined for bivariate copulas"));
        }
        let z_obs = self.marginals[observed_index].latent(observed_value)?;
        Ok(self.conditional_latent(observed_index, z_obs, noise))
    }

    /// Conditional draw when the observed coordinate is given as its latent score.
    pub fn conditional_latent(&self, observed_index: usize, z_obs: T, noise: T) -> T {
        let rho = self.rho();
        let z = rho * z_obs + (T::one() - rho * rho).sqrt() * noise;
        self.marginals[1 - observed_index].from_latent(z)
    }

    /// Log density of the bivariate Gaussian copula at latent scores `(a, b)`.
    pub fn ln_density_latent(&self, a: T, b: T) -> T {
        let rho = self.rho();
        let one_m = T::one() - rho * rho;
        let two = lit::<T>(2.0);
        -(rho * rho * (a * a + b * b) - two * rho * a * b) / (two * one_m) - one_m.ln() / two
    }
}

fn cholesky<T: Real>(a: &[T], d: usize) -> Result<Vec<T>> {
    let mut l = vec![T::zero(); d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s = s - l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return Err(Error::Decomposition(format!(
                        "correlation matrix is not positive definite (pivot {i} = {s})"
                    )));
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Ok(l)
}
