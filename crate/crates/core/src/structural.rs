//! Physical layer: the hierarchical prior over load, stress concentration and
//! yield strength, the effect of mitigation actions, and the over-stress and
//! fatigue limit states.

use std::fmt;

use rayon::prelude::*;

use crate::distributions::special::norm_inv_cdf;
use crate::distributions::{lhs_sample, CopulaSpec, LhsMatrix, MarginalSpec};
use crate::error::{invalid, Error, Result};
use crate::scalar::{count, lit, Real};

/// Stress multiplier of a strengthening repair.
pub const REPAIR_STRESS_FACTOR: f64 = 0.75;
/// SCF multiplier of a component replacement.
pub const REPLACE_SCF_FACTOR: f64 = 0.0;
/// Cycle-rate multiplier of reduced operation.
pub const REDUCE_CYCLE_FACTOR: f64 = 0.5;

/// Columns of the prior Latin hypercube design.
pub mod column {
    pub const LOAD_MEAN: usize = 0;
    pub const LOAD_SD: usize = 1;
    pub const SCF_SHAPE: usize = 2;
    pub const SCF_SCALE: usize = 3;
    pub const YIELD_MEAN: usize = 4;
    pub const YIELD_SD: usize = 5;
    pub const LOAD: usize = 6;
    pub const SCF: usize = 7;
    pub const YIELD: usize = 8;
    pub const SCATTER: usize = 9;
    /// Total number of uniforms per joint draw.
    pub const COUNT: usize = 10;
}

/// Hyperpriors of the hierarchical model.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors<T> {
    /// Mean of the applied stress, MPa.
    pub load_mean: MarginalSpec<T>,
    /// Standard deviation of the applied stress, MPa.
    pub load_sd: MarginalSpec<T>,
    pub scf_shape: MarginalSpec<T>,
    pub scf_scale: MarginalSpec<T>,
    /// Mean yield strength, MPa.
    pub yield_mean: MarginalSpec<T>,
    /// Standard deviation of yield strength, MPa.
    pub yield_sd: MarginalSpec<T>,
    /// Latent correlation between SCF and yield strength.
    pub rho: T,
}

impl<T: Real> Priors<T> {
    /// The railway-bridge joint: σ_L ~ N(μ, σ) with μ ~ N(50, 5) and
    /// σ ~ LogNormal(mean 6, sd 3); SCF ~ Gamma(α, γ) with α ~ N⁺(2, 0.5),
    /// γ ~ N⁺(0.5, 0.5); σ_Y ~ LogNormal(mean μ_Y, sd σ_Y) with
    /// μ_Y ~ N(400, 20), σ_Y ~ LogNormal(mean 10, sd 3); ρ = 2/3.
    pub fn bridge() -> Self {
        Self {
            load_mean: MarginalSpec::normal(lit(50.0), lit(5.0)).expect("valid"),
            load_sd: MarginalSpec::lognormal(lit(6.0), lit(3.0)).expect("valid"),
            scf_shape: MarginalSpec::truncated_normal_non_neg(lit(2.0), lit(0.5)).expect("valid"),
            scf_scale: MarginalSpec::truncated_normal_non_neg(lit(0.5), lit(0.5)).expect("valid"),
            yield_mean: MarginalSpec::normal(lit(400.0), lit(20.0)).expect("valid"),
            yield_sd: MarginalSpec::lognormal(lit(10.0), lit(3.0)).expect("valid"),
            rho: lit(2.0 / 3.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.abs() < T::one()) {
            return Err(invalid(format!("correlation out of range: rho = {}", self.rho)));
        }
        Ok(())
    }
}

impl<T: Real> Default for Priors<T> {
    fn default() -> Self {
        Self::bridge()
    }
}

/// Independent standard-normal innovations behind one joint draw.
///
/// Kept with the sample so that conditioning can re-use them (common random
/// numbers). The yield latent is `ρ·scf + √(1-ρ²)·yield_`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LatentNoise<T> {
    pub load: T,
    pub scf: T,
    pub yield_: T,
    pub scatter: T,
}

/// One joint draw of hyperparameters and physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParameterSample<T> {
    pub mu_sigma_l: T,
    pub sd_sigma_l: T,
    pub alpha_scf: T,
    pub gamma_scf: T,
    pub mu_sigma_y: T,
    pub sd_sigma_y: T,
    /// Applied stress, MPa.
    pub sigma_l: T,
    pub scf: T,
    /// Yield strength, MPa.
    pub sigma_y: T,
    pub noise: LatentNoise<T>,
}

impl<T: Real> ParameterSample<T> {
    /// Conditional law of σ_L given this draw's hyperparameters.
    pub fn load_marginal(&self) -> MarginalSpec<T> {
        MarginalSpec::Normal { mean: self.mu_sigma_l, sd: self.sd_sigma_l }
    }

    /// Conditional law of SCF given this draw's hyperparameters.
    pub fn scf_marginal(&self) -> MarginalSpec<T> {
        let tiny = T::min_positive_value();
        MarginalSpec::Gamma { shape: self.alpha_scf.max(tiny), scale: self.gamma_scf.max(tiny) }
    }

    /// Conditional law of σ_Y given this draw's hyperparameters.
    pub fn yield_marginal(&self) -> MarginalSpec<T> {
        MarginalSpec::lognormal(self.mu_sigma_y, self.sd_sigma_y)
            .expect("yield hyperparameters are positive by construction")
    }

    pub fn copula(&self, rho: T) -> Result<CopulaSpec<T>> {
        CopulaSpec::bivariate(self.scf_marginal(), self.yield_marginal(), rho)
    }

    /// Fatigue scatter quantile as a uniform.
    pub fn u_scatter(&self) -> T {
        crate::distributions::special::norm_cdf(self.noise.scatter)
    }
}

/// Maps one row of uniforms (see [`column`]) to a joint draw.
pub fn sample_from_uniforms<T: Real>(priors: &Priors<T>, row: &[f64]) -> Result<ParameterSample<T>> {
    if row.len() < column::COUNT {
        return Err(invalid(format!("prior draw needs {} uniforms, got {}", column::COUNT, row.len())));
    }
    let u = |j: usize| -> T { lit(row[j]) };
    let z = |j: usize| -> T { norm_inv_cdf(u(j)) };
    let mu_sigma_l = priors.load_mean.quantile(u(column::LOAD_MEAN))?;
    let sd_sigma_l = priors.load_sd.quantile(u(column::LOAD_SD))?;
    let alpha_scf = priors.scf_shape.quantile(u(column::SCF_SHAPE))?;
    let gamma_scf = priors.scf_scale.quantile(u(column::SCF_SCALE))?;
    let mu_sigma_y = priors.yield_mean.quantile(u(column::YIELD_MEAN))?;
    let sd_sigma_y = priors.yield_sd.quantile(u(column::YIELD_SD))?;
    if !(mu_sigma_y > T::zero()) {
        return Err(invalid(format!("mean yield strength draw {mu_sigma_y} is not positive")));
    }
    let noise = LatentNoise { load: z(column::LOAD), scf: z(column::SCF), yield_: z(column::YIELD), scatter: z(column::SCATTER) };
    let mut s = ParameterSample {
        mu_sigma_l,
        sd_sigma_l,
        alpha_scf,
        gamma_scf,
        mu_sigma_y,
        sd_sigma_y,
        sigma_l: mu_sigma_l + sd_sigma_l * noise.load,
        scf: T::zero(),
        sigma_y: T::zero(),
        noise,
    };
    let pair = s.copula(priors.rho)?.sample_latent(&[noise.scf, noise.yield_]);
    s.scf = pair[0];
    s.sigma_y = pair[1];
    Ok(s)
}

/// Maps every row of a design to joint draws.
pub fn samples_from_design<T: Real>(priors: &Priors<T>, design: &LhsMatrix) -> Result<Vec<ParameterSample<T>>> {
    priors.validate()?;
    design.rows().collect::<Vec<_>>().par_iter().map(|row| sample_from_uniforms(priors, row)).collect()
}

/// Draws `n` joint samples from a seeded Latin hypercube over all
/// [`column::COUNT`] dimensions.
pub fn draw_parameter_samples<T: Real>(priors: &Priors<T>, n: usize, seed: u64) -> Result<Vec<ParameterSample<T>>> {
    let design = lhs_sample(n, column::COUNT, seed)?;
    samples_from_design(priors, &design)
}

/// SN curve: `log10 N = log10_a − m·log10 S + scatter_sd·ζ`, ζ standard normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnModel<T> {
    pub log10_a: T,
    pub slope_m: T,
    pub scatter_sd: T,
}

impl<T: Real> SnModel<T> {
    /// Mean curve and scatter for a class D welded detail.
    pub fn class_d() -> Self {
        Self { log10_a: lit(12.6007), slope_m: lit(3.0), scatter_sd: lit(0.2095) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.slope_m > T::zero()) {
            return Err(invalid(format!("SN slope must be positive, got {}", self.slope_m)));
        }
        if !(self.scatter_sd >= T::zero()) {
            return Err(invalid(format!("SN scatter must be non-negative, got {}", self.scatter_sd)));
        }
        if !self.log10_a.is_finite() {
            return Err(invalid("SN intercept must be finite"));
        }
        Ok(())
    }

    /// `log10` of cycles to failure at stress range `s` (`+∞` for `s ≤ 0`).
    pub fn log10_cycles_to_failure(&self, s: T, scatter_z: T) -> T {
        if s <= T::zero() {
            return T::infinity();
        }
        self.log10_a - self.slope_m * s.log10() + self.scatter_sd * scatter_z
    }
}

impl<T: Real> Default for SnModel<T> {
    fn default() -> Self {
        Self::class_d()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadingConfig<T> {
    /// Stress cycles per maintenance window at full operation.
    pub annual_cycles: T,
    pub windows: usize,
}

impl<T: Real> LoadingConfig<T> {
    pub fn new(annual_cycles: T, windows: usize) -> Result<Self> {
        let l = Self { annual_cycles, windows };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.annual_cycles >= T::one()) || !self.annual_cycles.is_finite() {
            return Err(invalid(format!("annual_cycles must be ≥ 1, got {}", self.annual_cycles)));
        }
        if self.windows == 0 {
            return Err(invalid("windows must be ≥ 1"));
        }
        Ok(())
    }

    /// Cycles applied over all windows under action set `a`.
    pub fn applied_cycles(&self, a: ActionSet) -> T {
        self.annual_cycles * cycle_factor::<T>(a) * count(self.windows)
    }
}

/// A subset of the three mitigation actions for one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ActionSet {
    pub repair: bool,
    pub replace: bool,
    pub reduce_operation: bool,
}

impl ActionSet {
    pub const NONE: Self = Self::from_index(0);
    pub const REPAIR: Self = Self::from_index(1);
    pub const REPLACE: Self = Self::from_index(2);
    pub const REDUCE: Self = Self::from_index(4);

    /// All eight combinations, in [`index`](Self::index) order.
    pub const ALL: [Self; 8] = [
        Self::from_index(0),
        Self::from_index(1),
        Self::from_index(2),
        Self::from_index(3),
        Self::from_index(4),
        Self::from_index(5),
        Self::from_index(6),
        Self::from_index(7),
    ];

    /// Bit index: repair = 1, replace = 2, reduce = 4.
    pub const fn index(self) -> usize {
        self.repair as usize | (self.replace as usize) << 1 | (self.reduce_operation as usize) << 2
    }

    pub const fn from_index(i: usize) -> Self {
        Self { repair: i & 1 != 0, replace: i & 2 != 0, reduce_operation: i & 4 != 0 }
    }

    pub fn is_empty(self) -> bool {
        self.index() == 0
    }

    pub fn union(self, other: Self) -> Self {
        Self::from_index(self.index() | other.index())
    }

    fn members(self) -> impl Iterator<Item = (u8, &'static str, &'static str)> {
        [
            (self.repair, 0u8, "repair", "repair"),
            (self.replace, 1, "replace", "replace"),
            (self.reduce_operation, 2, "reduce operation", "reduce"),
        ]
        .into_iter()
        .filter(|m| m.0)
        .map(|(_, rank, long, short)| (rank, long, short))
    }

    /// Key for the lexicographic order repair < replace < reduce over the
    /// ordered member lists; the empty set sorts first.
    pub fn lex_key(self) -> Vec<u8> {
        self.members().map(|m| m.0).collect()
    }

    /// Compact machine label, e.g. `repair+reduce`; `none` for the empty set.
    pub fn short_label(self) -> String {
        if self.is_empty() {
            return "none".into();
        }
        self.members().map(|m| m.2).collect::<Vec<_>>().join("+")
    }

    /// Parses a [`short_label`](Self::short_label).
    pub fn parse(label: &str) -> Option<Self> {
        if label == "none" {
            return Some(Self::NONE);
        }
        let mut a = Self::NONE;
        for part in label.split('+') {
            match part.trim() {
                "repair" => a.repair = true,
                "replace" => a.replace = true,
                "reduce" => a.reduce_operation = true,
                _ => return None,
            }
        }
        Some(a)
    }
}

impl fmt::Display for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.members().map(|m| m.1).collect();
        match names.len() {
            0 => write!(f, "no action"),
            1 => write!(f, "{}", names[0]),
            2 => write!(f, "{} and {}", names[0], names[1]),
            _ => write!(f, "{}, {}, and {}", names[0], names[1], names[2]),
        }
    }
}

/// Multiplier on the cycle rate under `a`.
pub fn cycle_factor<T: Real>(a: ActionSet) -> T {
    if a.reduce_operation {
        lit(REDUCE_CYCLE_FACTOR)
    } else {
        T::one()
    }
}

/// Returns the sample as seen after the actions in `a`. Reduced operation
/// does not alter the sample; its effect is applied through [`cycle_factor`].
pub fn apply_actions<T: Real>(s: &ParameterSample<T>, a: ActionSet) -> ParameterSample<T> {
    let mut out = *s;
    if a.repair {
        out.sigma_l = out.sigma_l * lit(REPAIR_STRESS_FACTOR);
    }
    if a.replace {
        out.scf = out.scf * lit(REPLACE_SCF_FACTOR);
    }
    out
}

/// Peak stress at the detail, `σ_L·(1 + SCF)`. Compressive σ_L counts as zero.
#[inline]
pub fn peak_stress<T: Real>(sigma_l: T, scf: T) -> T {
    sigma_l.max(T::zero()) * (T::one() + scf)
}

pub fn overstress_failed<T: Real>(s: &ParameterSample<T>, a: ActionSet) -> bool {
    let acted = apply_actions(s, a);
    peak_stress(acted.sigma_l, acted.scf) > acted.sigma_y
}

/// `log10(applied cycles / cycles to failure)`; failure iff `≥ 0`.
#[inline]
pub fn fatigue_log_demand<T: Real>(stress: T, cycles: T, sn: &SnModel<T>, scatter_z: T) -> T {
    if stress <= T::zero() {
        return T::neg_infinity();
    }
    cycles.log10() - sn.log10_cycles_to_failure(stress, scatter_z)
}

/// Fatigue check with the scatter supplied as a uniform quantile.
pub fn fatigue_failed<T: Real>(
    s: &ParameterSample<T>,
    a: ActionSet,
    sn: &SnModel<T>,
    load: &LoadingConfig<T>,
    u_scatter: T,
) -> bool {
    fatigue_failed_latent(s, a, sn, load, norm_inv_cdf(u_scatter))
}

pub(crate) fn fatigue_failed_latent<T: Real>(
    s: &ParameterSample<T>,
    a: ActionSet,
    sn: &SnModel<T>,
    load: &LoadingConfig<T>,
    scatter_z: T,
) -> bool {
    let acted = apply_actions(s, a);
    let stress = peak_stress(acted.sigma_l, acted.scf);
    fatigue_log_demand(stress, load.applied_cycles(a), sn, scatter_z) >= T::zero()
}

/// Union of both limit states for one action set, using the sample's own scatter draw.
#[inline]
pub fn limit_state_failed<T: Real>(s: &ParameterSample<T>, a: ActionSet, sn: &SnModel<T>, load: &LoadingConfig<T>) -> bool {
    overstress_failed(s, a) || fatigue_failed_latent(s, a, sn, load, s.noise.scatter)
}

/// Failure indicator of all eight action sets, bit `a.index()` set when `a` fails.
pub fn failure_mask<T: Real>(s: &ParameterSample<T>, sn: &SnModel<T>, load: &LoadingConfig<T>) -> u8 {
    ActionSet::ALL
        .iter()
        .fold(0u8, |m, &a| if limit_state_failed(s, a, sn, load) { m | 1 << a.index() } else { m })
}

/// Monte Carlo failure probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureProbability<T> {
    pub p: T,
    pub standard_error: T,
}

impl<T: Real> FailureProbability<T> {
    pub(crate) fn from_count(failures: usize, n: usize) -> Self {
        let p = count::<T>(failures) / count(n);
        Self { p, standard_error: (p * (T::one() - p) / count(n)).sqrt() }
    }
}

pub fn pr_fail<T: Real>(
    samples: &[ParameterSample<T>],
    a: ActionSet,
    sn: &SnModel<T>,
    load: &LoadingConfig<T>,
) -> Result<FailureProbability<T>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let failures = samples.par_iter().filter(|s| limit_state_failed(*s, a, sn, load)).count();
    Ok(FailureProbability::from_count(failures, samples.len()))
}

/// Reliability index `β = −Φ⁻¹(p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReliabilityIndex<T> {
    Finite(T),
    /// `p = 0`: failure never observed.
    PlusInfinity,
    /// `p = 1`: failure certain.
    MinusInfinity,
}

impl<T: Real> ReliabilityIndex<T> {
    pub fn value(&self) -> T {
        match *self {
            Self::Finite(b) => b,
            Self::PlusInfinity => T::infinity(),
            Self::MinusInfinity => T::neg_infinity(),
        }
    }
}

impl<T: Real> fmt::Display for ReliabilityIndex<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(b) => write!(f, "{b}"),
            Self::PlusInfinity => write!(f, "inf"),
            Self::MinusInfinity => write!(f, "-inf"),
        }
    }
}

pub fn pr_to_beta<T: Real>(p: T) -> Result<ReliabilityIndex<T>> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::Domain { value: p.to_f64().unwrap_or(f64::NAN), domain: "[0, 1]" });
    }
    Ok(if p == T::zero() {
        ReliabilityIndex::PlusInfinity
    } else if p == T::one() {
        ReliabilityIndex::MinusInfinity
    } else {
        ReliabilityIndex::Finite(-norm_inv_cdf(p))
    })
}

/// Result of fitting `annual_cycles` to a target no-action failure probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration<T> {
    pub annual_cycles: T,
    pub achieved: FailureProbability<T>,
}

/// Smallest cycle count at which the no-action failure frequency over
/// `samples` reaches `target`, found exactly from the per-sample fatigue
/// thresholds (failure probability is a step function of the cycle count).
pub fn calibrate_annual_cycles<T: Real>(
    samples: &[ParameterSample<T>],
    sn: &SnModel<T>,
    windows: usize,
    target: T,
) -> Result<Calibration<T>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(target > T::zero() && target < T::one()) {
        return Err(invalid(format!("target failure probability {target} outside (0, 1)")));
    }
    let n = samples.len();
    let mut over = 0usize;
    // log10 of the applied cycles at which each non-overstressed sample fails in fatigue
    let mut thresholds: Vec<T> = Vec::with_capacity(n);
    for s in samples {
        if overstress_failed(s, ActionSet::NONE) {
            over += 1;
        } else {
            let stress = peak_stress(s.sigma_l, s.scf);
            let t = sn.log10_cycles_to_failure(stress, s.noise.scatter);
            if t.is_finite() {
                thresholds.push(t);
            }
        }
    }
    let needed = (target * count(n)).ceil().to_usize().unwrap_or(n).max(1);
    if needed <= over {
        return Err(invalid(format!(
            "over-stress alone gives failure frequency {} ≥ target {target}",
            over as f64 / n as f64
        )));
    }
    let k = needed - over;
    if k > thresholds.len() {
        return Err(invalid("target failure probability unreachable through fatigue"));
    }
    thresholds.sort_by(|a, b| a.partial_cmp(b).expect("finite thresholds"));
    let mut log_total = thresholds[k - 1];
    let scale = count::<T>(windows).log10();
    let mut load = LoadingConfig { annual_cycles: T::from_f64(10f64).unwrap().powf(log_total - scale), windows };
    // rounding in the power can land just short of the threshold
    let mut guard = 0;
    while pr_fail(samples, ActionSet::NONE, sn, &load)?.p < count::<T>(needed) / count(n) && guard < 64 {
        log_total = log_total + T::epsilon() * lit(16.0) * (T::one() + log_total.abs());
        load.annual_cycles = lit::<T>(10.0).powf(log_total - scale);
        guard += 1;
    }
    load.validate()?;
    Ok(Calibration { annual_cycles: load.annual_cycles, achieved: pr_fail(samples, ActionSet::NONE, sn, &load)? })
}
