//! Preposterior value-of-information analysis.
//!
//! For each outer draw a measurement is hypothesized from a fresh joint
//! sample, the prior sample set is conditioned on it, and the decision is
//! re-solved. The mean of the conditional optimal utilities minus the prior
//! optimal utility is the expected value of the data.
//!
//! Conditioning is importance sampling over the prior set, so hyperparameters
//! are updated along with the observed quantity. Two weighting routes exist:
//!
//! * reweighting keeps each sample and multiplies in the measurement
//!   likelihood;
//! * the proposal route pins the observed quantity (exactly for perfect data,
//!   or at `z + ε·e` re-using the sample's own innovation `e`) and weights by
//!   the prior density of the pinned value under the sample's
//!   hyperparameters. Unobserved copula partners are redrawn from their
//!   conditional law with the sample's own innovation.

use std::fmt;

use log::debug;
use rayon::prelude::*;

use crate::decision::{solve, solve_weighted, DecisionProblem};
use crate::distributions::special::{norm_inv_cdf, norm_ln_pdf};
use crate::distributions::{lhs_sample, substream_seed, LhsMatrix};
use crate::error::{invalid, Error, Result};
use crate::scalar::{count, lit, Real};
use crate::structural::{column, sample_from_uniforms, ActionSet, ParameterSample, Priors};

/// Substream used for the outer design.
pub(crate) const OUTER_STREAM: u64 = 1;

/// Quantity observed by a data source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SourceKind {
    /// Material testing: observes yield strength.
    Testing,
    /// Inspection of the detail geometry: observes SCF.
    Inspection,
    /// Structural health monitoring: observes applied stress.
    Shm,
}

impl SourceKind {
    pub const ALL: [Self; 3] = [Self::Testing, Self::Inspection, Self::Shm];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn observed<T: Real>(self, s: &ParameterSample<T>) -> T {
        match self {
            Self::Testing => s.sigma_y,
            Self::Inspection => s.scf,
            Self::Shm => s.sigma_l,
        }
    }

    /// Short machine label: `test`, `insp` or `shm`.
    pub fn label(self) -> &'static str {
        match self {
            Self::Testing => "test",
            Self::Inspection => "insp",
            Self::Shm => "shm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "test" | "testing" => Some(Self::Testing),
            "insp" | "inspection" => Some(Self::Inspection),
            "shm" => Some(Self::Shm),
            _ => None,
        }
    }

    fn noise_column(self) -> usize {
        column::COUNT + self.index()
    }

    fn innovation<T: Real>(self, s: &ParameterSample<T>) -> T {
        match self {
            Self::Testing => s.noise.yield_,
            Self::Inspection => s.noise.scf,
            Self::Shm => s.noise.load,
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Testing => "testing",
            Self::Inspection => "inspection",
            Self::Shm => "SHM",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise<T> {
    Perfect,
    /// Additive normal error with standard deviation `ε`.
    Gaussian(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataSource<T> {
    pub kind: SourceKind,
    pub noise: Noise<T>,
}

impl<T: Real> DataSource<T> {
    pub fn perfect(kind: SourceKind) -> Self {
        Self { kind, noise: Noise::Perfect }
    }

    pub fn gaussian(kind: SourceKind, epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(invalid(format!("measurement sd must be positive and finite, got {epsilon}")));
        }
        Ok(Self { kind, noise: Noise::Gaussian(epsilon) })
    }
}

/// A set of data sources with at most one per kind, kept in kind order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementPlan<T> {
    sources: Vec<DataSource<T>>,
}

impl<T: Real> MeasurementPlan<T> {
    pub fn new(mut sources: Vec<DataSource<T>>) -> Result<Self> {
        sources.sort_by_key(|s| s.kind);
        if sources.windows(2).any(|w| w[0].kind == w[1].kind) {
            return Err(invalid("a measurement plan may hold at most one source per kind"));
        }
        for s in &sources {
            if let Noise::Gaussian(e) = s.noise {
                DataSource::gaussian(s.kind, e)?;
            }
        }
        Ok(Self { sources })
    }

    pub fn empty() -> Self {
        Self { sources: Vec::new() }
    }

    pub fn perfect(kinds: &[SourceKind]) -> Result<Self> {
        Self::new(kinds.iter().map(|&k| DataSource::perfect(k)).collect())
    }

    /// The perfect-information plan for subset `mask` (bit `k.index()` per kind).
    pub fn perfect_subset(mask: usize) -> Self {
        let kinds: Vec<_> = SourceKind::ALL.into_iter().filter(|k| mask >> k.index() & 1 == 1).collect();
        Self::perfect(&kinds).expect("distinct kinds")
    }

    pub fn sources(&self) -> &[DataSource<T>] {
        &self.sources
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// `none`, or the source labels joined with `+`.
    pub fn label(&self) -> String {
        if self.is_empty() {
            return "none".into();
        }
        self.sources.iter().map(|s| s.kind.label()).collect::<Vec<_>>().join("+")
    }
}

/// A measurement value paired with the source that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<T> {
    pub source: DataSource<T>,
    pub z: T,
}

/// Simulates a measurement of `s` with noise quantile `u`.
pub fn hypothesize_measurement<T: Real>(s: &ParameterSample<T>, src: DataSource<T>, u: T) -> T {
    let x = src.kind.observed(s);
    match src.noise {
        Noise::Perfect => x,
        Noise::Gaussian(eps) => x + eps * norm_inv_cdf(u),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    Reweight,
    Proposal,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Reweight => "reweight",
            Self::Proposal => "proposal",
        })
    }
}

/// A weighted sample set approximating the posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior<T> {
    pub samples: Vec<ParameterSample<T>>,
    /// Normalized to sum to one.
    pub weights: Vec<T>,
    /// Effective sample size `1 / Σw²`.
    pub ess: T,
    pub route: Route,
}

impl<T: Real> Posterior<T> {
    pub fn mean(&self, f: impl Fn(&ParameterSample<T>) -> T) -> T {
        self.samples.iter().zip(&self.weights).fold(T::zero(), |acc, (s, &w)| acc + w * f(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoiSettings {
    /// Reweighted posteriors with a smaller effective sample size switch to
    /// the proposal route.
    pub ess_floor: f64,
    /// Largest tolerated fraction of outer draws with all-zero weights.
    pub max_degenerate_fraction: f64,
}

impl Default for VoiSettings {
    fn default() -> Self {
        Self { ess_floor: 50.0, max_degenerate_fraction: 0.01 }
    }
}

/// Conditions one prior sample on the observations; returns the adjusted
/// sample and its unnormalized log weight.
fn condition_sample<T: Real>(
    s: &ParameterSample<T>,
    observations: &[Observation<T>],
    route: Route,
    rho: T,
) -> (ParameterSample<T>, T) {
    let mut x = *s;
    let mut lw = T::zero();
    let mut pinned: [Option<T>; 3] = [None; 3];
    let mut likelihood: [Option<(T, T)>; 3] = [None; 3];
    for o in observations {
        let k = o.source.kind;
        match (o.source.noise, route) {
            (Noise::Perfect, _) => pinned[k.index()] = Some(o.z),
            (Noise::Gaussian(eps), Route::Proposal) => pinned[k.index()] = Some(o.z + eps * k.innovation(s)),
            (Noise::Gaussian(eps), Route::Reweight) => likelihood[k.index()] = Some((o.z, eps)),
        }
    }
    if let Some(v) = pinned[SourceKind::Shm.index()] {
        lw = lw + s.load_marginal().ln_pdf(v);
        x.sigma_l = v;
    }
    let scf_law = s.scf_marginal();
    let yield_law = s.yield_marginal();
    let residual = (T::one() - rho * rho).sqrt();
    let pin_scf = pinned[SourceKind::Inspection.index()];
    let pin_yield = pinned[SourceKind::Testing.index()];
    if let Some(a) = pin_scf {
        x.scf = a;
    }
    if let Some(b) = pin_yield {
        x.sigma_y = b;
    }
    match (pin_scf, pin_yield) {
        (None, None) => {}
        (Some(a), None) => match scf_law.latent(a) {
            Ok(za) => {
                lw = lw + scf_law.ln_pdf(a);
                x.sigma_y = yield_law.from_latent(rho * za + residual * s.noise.yield_);
            }
            Err(_) => lw = T::neg_infinity(),
        },
        (None, Some(b)) => match yield_law.latent(b) {
            Ok(zb) => {
                lw = lw + yield_law.ln_pdf(b);
                x.scf = scf_law.from_latent(rho * zb + residual * s.noise.scf);
            }
            Err(_) => lw = T::neg_infinity(),
        },
        (Some(a), Some(b)) => match (scf_law.latent(a), yield_law.latent(b)) {
            (Ok(za), Ok(zb)) => {
                let c = -(rho * rho * (za * za + zb * zb) - lit::<T>(2.0) * rho * za * zb)
                    / (lit::<T>(2.0) * (T::one() - rho * rho))
                    - (T::one() - rho * rho).ln() / lit(2.0);
                lw = lw + scf_law.ln_pdf(a) + yield_law.ln_pdf(b) + c;
            }
            _ => lw = T::neg_infinity(),
        },
    }
    for k in SourceKind::ALL {
        if let Some((z, eps)) = likelihood[k.index()] {
            lw = lw + norm_ln_pdf((z - k.observed(&x)) / eps);
        }
    }
    // a zero or singular density cannot carry weight
    if !lw.is_finite() {
        lw = T::neg_infinity();
    }
    (x, lw)
}

/// Normalizes log weights; `None` when every weight underflows to zero on
/// the linear scale.
fn normalize<T: Real>(log_weights: &[T]) -> Option<(Vec<T>, T)> {
    let max = log_weights.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    if !(max >= T::min_positive_value().ln()) {
        return None;
    }
    let mut w: Vec<T> = log_weights.iter().map(|&v| (v - max).exp()).collect();
    let sum = w.iter().fold(T::zero(), |a, &b| a + b);
    for v in &mut w {
        *v = *v / sum;
    }
    let ess = T::one() / w.iter().fold(T::zero(), |a, &b| a + b * b);
    Some((w, ess))
}

fn conditioned<T: Real>(
    samples: &[ParameterSample<T>],
    observations: &[Observation<T>],
    route: Route,
    rho: T,
) -> Option<Posterior<T>> {
    let (adjusted, lw): (Vec<_>, Vec<_>) =
        samples.iter().map(|s| condition_sample(s, observations, route, rho)).unzip();
    normalize(&lw).map(|(weights, ess)| Posterior { samples: adjusted, weights, ess, route })
}

fn degenerate<T: Real>(observations: &[Observation<T>]) -> Error {
    Error::DegeneratePosterior { observation: observations.first().and_then(|o| o.z.to_f64()).unwrap_or(f64::NAN) }
}

/// Conditions the prior sample set on any mix of perfect and noisy
/// observations. Noisy observations are reweighted first; if that leaves
/// fewer than `settings.ess_floor` effective samples the proposal route is
/// used instead.
pub fn condition<T: Real>(
    samples: &[ParameterSample<T>],
    observations: &[Observation<T>],
    rho: T,
    settings: &VoiSettings,
) -> Result<Posterior<T>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let noisy = observations.iter().any(|o| matches!(o.source.noise, Noise::Gaussian(_)));
    if noisy {
        if let Some(p) = conditioned(samples, observations, Route::Reweight, rho) {
            if p.ess.to_f64().unwrap_or(0.0) >= settings.ess_floor {
                return Ok(p);
            }
            debug!("reweighted ESS {} below floor {}, switching to proposal route", p.ess, settings.ess_floor);
        } else {
            debug!("all reweighted samples vanished, switching to proposal route");
        }
    }
    conditioned(samples, observations, Route::Proposal, rho).ok_or_else(|| degenerate(observations))
}

/// Perfect information on `kinds`, taking the observed values from `observed`.
pub fn condition_perfect<T: Real>(
    samples: &[ParameterSample<T>],
    kinds: &[SourceKind],
    observed: &ParameterSample<T>,
    rho: T,
) -> Result<Posterior<T>> {
    let obs: Vec<_> =
        kinds.iter().map(|&k| Observation { source: DataSource::perfect(k), z: k.observed(observed) }).collect();
    condition(samples, &obs, rho, &VoiSettings::default())
}

/// Importance reweighting by one noisy measurement `z`.
pub fn condition_imperfect<T: Real>(
    samples: &[ParameterSample<T>],
    src: DataSource<T>,
    z: T,
    rho: T,
) -> Result<Posterior<T>> {
    if !matches!(src.noise, Noise::Gaussian(_)) {
        return Err(invalid("imperfect conditioning needs a Gaussian source"));
    }
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let obs = [Observation { source: src, z }];
    conditioned(samples, &obs, Route::Reweight, rho).ok_or_else(|| degenerate(&obs))
}

/// Outcome of one outer draw.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterDraw<T> {
    /// Hypothesized measurements, in plan order.
    pub observations: Vec<T>,
    /// Optimal expected utility under the conditioned samples.
    pub e_u: T,
    pub action: ActionSet,
    pub ess: T,
    pub route: Option<Route>,
    /// All conditioning weights vanished; excluded from the averages.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoiResult<T> {
    pub plan: String,
    pub e_u_prior: T,
    pub prior_action: ActionSet,
    pub e_u_preposterior: T,
    pub voi: T,
    pub mc_standard_error: T,
    pub n_outer: usize,
    pub degenerate: usize,
    /// Draws that left the reweighting route for the proposal route.
    pub fallbacks: usize,
    pub draws: Vec<OuterDraw<T>>,
}

/// Uniform design of the outer loop: the prior columns plus one noise
/// column per source kind.
pub fn outer_design(n_outer: usize, seed: u64) -> Result<LhsMatrix> {
    lhs_sample(n_outer, column::COUNT + SourceKind::ALL.len(), substream_seed(seed, OUTER_STREAM))
}

/// Joint draw and hypothesized measurements for row `j` of the outer design.
pub(crate) fn outer_observations<T: Real>(
    priors: &Priors<T>,
    plan: &MeasurementPlan<T>,
    design: &LhsMatrix,
    j: usize,
) -> Result<(ParameterSample<T>, Vec<Observation<T>>)> {
    let row = design.row(j);
    let truth = sample_from_uniforms(priors, row)?;
    let obs = plan
        .sources()
        .iter()
        .map(|&src| Observation { source: src, z: hypothesize_measurement(&truth, src, lit(row[src.kind.noise_column()])) })
        .collect();
    Ok((truth, obs))
}

/// Mean and standard error of the non-degenerate draws.
pub(crate) fn summarize<T: Real>(values: impl Iterator<Item = T>) -> Result<(T, T, usize)> {
    let v: Vec<T> = values.collect();
    if v.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = count::<T>(v.len());
    let mean = v.iter().fold(T::zero(), |a, &b| a + b) / n;
    let se = if v.len() > 1 {
        let ss = v.iter().fold(T::zero(), |a, &b| a + (b - mean) * (b - mean));
        (ss / (n - T::one()) / n).sqrt()
    } else {
        T::zero()
    };
    Ok((mean, se, v.len()))
}

pub(crate) fn check_degenerate(degenerate: usize, total: usize, settings: &VoiSettings) -> Result<()> {
    if degenerate as f64 > settings.max_degenerate_fraction * total as f64 {
        return Err(Error::TooManyDegenerateDraws { degenerate, total, limit: settings.max_degenerate_fraction });
    }
    Ok(())
}

/// Expected value of the data in `plan` with default settings.
pub fn voi<T: Real>(plan: &MeasurementPlan<T>, p: &DecisionProblem<T>, n_outer: usize, seed: u64) -> Result<VoiResult<T>> {
    voi_with(plan, p, n_outer, seed, &VoiSettings::default())
}

pub fn voi_with<T: Real>(
    plan: &MeasurementPlan<T>,
    p: &DecisionProblem<T>,
    n_outer: usize,
    seed: u64,
    settings: &VoiSettings,
) -> Result<VoiResult<T>> {
    if n_outer == 0 {
        return Err(invalid("n_outer must be ≥ 1"));
    }
    let prior = solve(p)?;
    let label = plan.label();
    if plan.is_empty() {
        let n = count::<T>(p.samples.len());
        let draw = OuterDraw {
            observations: vec![],
            e_u: prior.e_u_star,
            action: prior.a_star,
            ess: n,
            route: None,
            degenerate: false,
        };
        return Ok(VoiResult {
            plan: label,
            e_u_prior: prior.e_u_star,
            prior_action: prior.a_star,
            e_u_preposterior: prior.e_u_star,
            voi: T::zero(),
            mc_standard_error: T::zero(),
            n_outer,
            degenerate: 0,
            fallbacks: 0,
            draws: vec![draw; n_outer],
        });
    }
    let design = outer_design(n_outer, seed)?;
    let draws: Vec<OuterDraw<T>> = (0..n_outer)
        .into_par_iter()
        .map(|j| {
            let (_, obs) = outer_observations(&p.priors, plan, &design, j)?;
            let z: Vec<T> = obs.iter().map(|o| o.z).collect();
            match condition(&p.samples, &obs, p.priors.rho, settings) {
                Ok(post) => {
                    let r = solve_weighted(&post.samples, &post.weights, &p.actions, &p.cost, &p.sn, &p.load)?;
                    Ok(OuterDraw {
                        observations: z,
                        e_u: r.e_u_star,
                        action: r.a_star,
                        ess: post.ess,
                        route: Some(post.route),
                        degenerate: false,
                    })
                }
                Err(Error::DegeneratePosterior { .. }) => Ok(OuterDraw {
                    observations: z,
                    e_u: T::nan(),
                    action: prior.a_star,
                    ess: T::zero(),
                    route: None,
                    degenerate: true,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let degenerate = draws.iter().filter(|d| d.degenerate).count();
    check_degenerate(degenerate, n_outer, settings)?;
    let noisy = plan.sources().iter().any(|s| matches!(s.noise, Noise::Gaussian(_)));
    let fallbacks = if noisy { draws.iter().filter(|d| d.route == Some(Route::Proposal)).count() } else { 0 };
    let (mean, se, _) = summarize(draws.iter().filter(|d| !d.degenerate).map(|d| d.e_u))?;
    Ok(VoiResult {
        plan: label,
        e_u_prior: prior.e_u_star,
        prior_action: prior.a_star,
        e_u_preposterior: mean,
        voi: mean - prior.e_u_star,
        mc_standard_error: se,
        n_outer,
        degenerate,
        fallbacks,
        draws,
    })
}

/// Perfect-information VoI for all eight subsets of the three sources, in
/// subset-mask order (bit 0 testing, bit 1 inspection, bit 2 SHM). All
/// subsets share the same outer draws.
pub fn voi_all_subsets<T: Real>(p: &DecisionProblem<T>, n_outer: usize, seed: u64) -> Result<Vec<VoiResult<T>>> {
    voi_all_subsets_with(p, n_outer, seed, &VoiSettings::default())
}

pub fn voi_all_subsets_with<T: Real>(
    p: &DecisionProblem<T>,
    n_outer: usize,
    seed: u64,
    settings: &VoiSettings,
) -> Result<Vec<VoiResult<T>>> {
    (0..8).map(|mask| voi_with(&MeasurementPlan::perfect_subset(mask), p, n_outer, seed, settings)).collect()
}

/// Standard error of `Σ cᵢ·voiᵢ` over paired outer draws.
pub fn combination_standard_error<T: Real>(terms: &[(T, &VoiResult<T>)]) -> Result<T> {
    let n = terms.first().map(|t| t.1.draws.len()).ok_or(Error::EmptySamples)?;
    if terms.iter().any(|t| t.1.draws.len() != n) {
        return Err(invalid("combined results must share the same outer draws"));
    }
    let combined = (0..n)
        .filter(|&j| terms.iter().all(|t| !t.1.draws[j].degenerate))
        .map(|j| terms.iter().fold(T::zero(), |acc, (c, r)| acc + *c * r.draws[j].e_u));
    Ok(summarize(combined)?.1)
}

/// One point of a precision sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint<T> {
    pub epsilon: T,
    pub result: VoiResult<T>,
}

/// VoI of a single noisy source over a grid of measurement standard
/// deviations, with common outer draws across the grid.
pub fn voi_sensitivity<T: Real>(
    kind: SourceKind,
    epsilons: &[T],
    p: &DecisionProblem<T>,
    n_outer: usize,
    seed: u64,
) -> Result<Vec<SweepPoint<T>>> {
    voi_sensitivity_with(kind, epsilons, p, n_outer, seed, &VoiSettings::default())
}

pub fn voi_sensitivity_with<T: Real>(
    kind: SourceKind,
    epsilons: &[T],
    p: &DecisionProblem<T>,
    n_outer: usize,
    seed: u64,
    settings: &VoiSettings,
) -> Result<Vec<SweepPoint<T>>> {
    if epsilons.is_empty() {
        return Err(invalid("empty ε grid"));
    }
    if epsilons.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("ε grid must be strictly ascending"));
    }
    epsilons
        .iter()
        .map(|&eps| {
            let plan = MeasurementPlan::new(vec![DataSource::gaussian(kind, eps)?])?;
            Ok(SweepPoint { epsilon: eps, result: voi_with(&plan, p, n_outer, seed, settings)? })
        })
        .collect()
}

/// Weighted least-squares non-increasing fit (pool adjacent violators).
pub fn isotonic_non_increasing<T: Real>(values: &[T], weights: &[T]) -> Vec<T> {
    assert_eq!(values.len(), weights.len());
    // blocks of (mean, weight, length)
    let mut blocks: Vec<(T, T, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, l2) = blocks[blocks.len() - 1];
            let (m1, w1, l1) = blocks[blocks.len() - 2];
            if m1 >= m2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            let w = w1 + w2;
            blocks.push(((m1 * w1 + m2 * w2) / w, w, l1 + l2));
        }
    }
    blocks.into_iter().flat_map(|(m, _, l)| std::iter::repeat_n(m, l)).collect()
}
