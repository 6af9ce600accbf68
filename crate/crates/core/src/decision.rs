//! Expected-utility decision analysis over the eight mitigation action sets.
//!
//! Utility is `−(pf·c_fail) − mitigation cost`. Failure frequencies for all
//! action sets come from one pass over the samples using per-sample failure
//! masks, so every action is evaluated on the same draws.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::scalar::{count, lit, Real};
use crate::structural::{
    draw_parameter_samples, failure_mask, ActionSet, FailureProbability, LoadingConfig, ParameterSample, Priors, SnModel,
};

/// Samples per parallel chunk. Fixed so that floating-point sums do not
/// depend on the number of worker threads.
pub(crate) const CHUNK: usize = 4096;

/// Costs, in units of the failure cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel<T> {
    pub c_fail: T,
    pub c_repair: T,
    pub c_replace: T,
    pub c_reduce: T,
    pub c_site_visit: T,
    /// Charge the site visit for reduced operation as well as for repair and
    /// replacement.
    pub site_visit_for_reduce: bool,
}

impl<T: Real> CostModel<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_fail", self.c_fail),
            ("c_repair", self.c_repair),
            ("c_replace", self.c_replace),
            ("c_reduce", self.c_reduce),
            ("c_site_visit", self.c_site_visit),
        ] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(invalid(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Total mitigation cost of `a`, including at most one site visit.
    pub fn mitigation_cost(&self, a: ActionSet) -> T {
        let mut c = T::zero();
        if a.repair {
            c = c + self.c_repair;
        }
        if a.replace {
            c = c + self.c_replace;
        }
        if a.reduce_operation {
            c = c + self.c_reduce;
        }
        if a.repair || a.replace || (a.reduce_operation && self.site_visit_for_reduce) {
            c = c + self.c_site_visit;
        }
        c
    }
}

impl<T: Real> Default for CostModel<T> {
    fn default() -> Self {
        Self {
            c_fail: T::one(),
            c_repair: lit(0.025),
            c_replace: lit(0.075),
            c_reduce: lit(0.05),
            c_site_visit: lit(0.01),
            site_visit_for_reduce: false,
        }
    }
}

/// A decision problem: prior samples plus the models that score them.
#[derive(Debug, Clone)]
pub struct DecisionProblem<T> {
    pub priors: Priors<T>,
    pub samples: Vec<ParameterSample<T>>,
    pub cost: CostModel<T>,
    pub sn: SnModel<T>,
    pub load: LoadingConfig<T>,
    /// Candidate action sets; all eight by default.
    pub actions: Vec<ActionSet>,
}

impl<T: Real> DecisionProblem<T> {
    pub fn new(
        priors: Priors<T>,
        samples: Vec<ParameterSample<T>>,
        cost: CostModel<T>,
        sn: SnModel<T>,
        load: LoadingConfig<T>,
    ) -> Result<Self> {
        let p = Self { priors, samples, cost, sn, load, actions: ActionSet::ALL.to_vec() };
        p.validate()?;
        Ok(p)
    }

    /// Draws `n` prior samples with `seed` and wraps them in a problem.
    pub fn from_priors(
        priors: Priors<T>,
        n: usize,
        seed: u64,
        cost: CostModel<T>,
        sn: SnModel<T>,
        load: LoadingConfig<T>,
    ) -> Result<Self> {
        let samples = draw_parameter_samples(&priors, n, seed)?;
        Self::new(priors, samples, cost, sn, load)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        if self.actions.is_empty() {
            return Err(invalid("no candidate actions"));
        }
        self.priors.validate()?;
        self.cost.validate()?;
        self.sn.validate()?;
        self.load.validate()
    }
}

/// One row of the decision table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionEvaluation<T> {
    pub action: ActionSet,
    pub pr_fail: FailureProbability<T>,
    pub mitigation_cost: T,
    pub expected_utility: T,
}

impl<T: Real> ActionEvaluation<T> {
    /// `pf + mitigation cost` in units of the failure cost.
    pub fn expected_cost(&self) -> T {
        -self.expected_utility
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionResult<T> {
    /// Rows in the order of the candidate actions.
    pub table: Vec<ActionEvaluation<T>>,
    pub a_star: ActionSet,
    pub e_u_star: T,
}

impl<T: Real> DecisionResult<T> {
    pub fn row(&self, a: ActionSet) -> Option<&ActionEvaluation<T>> {
        self.table.iter().find(|r| r.action == a)
    }

    /// Rows sorted from best to worst, ties broken as in [`select_optimal`].
    pub fn ranked(&self) -> Vec<ActionEvaluation<T>> {
        let mut rows = self.table.clone();
        rows.sort_by(|a, b| compare_rows(b, a));
        rows
    }
}

/// `−(pf·c_fail) − mitigation cost`.
#[inline]
pub fn utility<T: Real>(pf: T, a: ActionSet, cost: &CostModel<T>) -> T {
    -(pf * cost.c_fail) - cost.mitigation_cost(a)
}

/// Orders two rows by preference: higher utility, then lower mitigation
/// cost, then the lexicographic member order repair < replace < reduce.
fn compare_rows<T: Real>(a: &ActionEvaluation<T>, b: &ActionEvaluation<T>) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    match a.expected_utility.partial_cmp(&b.expected_utility) {
        Some(Ordering::Equal) | None => {}
        Some(o) => return o,
    }
    match b.mitigation_cost.partial_cmp(&a.mitigation_cost) {
        Some(Ordering::Equal) | None => {}
        Some(o) => return o,
    }
    b.action.lex_key().cmp(&a.action.lex_key())
}

/// Index of the preferred row.
pub fn select_optimal<T: Real>(rows: &[ActionEvaluation<T>]) -> Option<usize> {
    (0..rows.len()).reduce(|best, i| if compare_rows(&rows[i], &rows[best]).is_gt() { i } else { best })
}

/// Failure frequencies of all eight action sets.
///
/// Without weights the result is `failures / n` for each action. With
/// weights (assumed normalized) it is the weighted sum of failure indicators.
pub fn failure_frequencies<T: Real>(
    samples: &[ParameterSample<T>],
    weights: Option<&[T]>,
    sn: &SnModel<T>,
    load: &LoadingConfig<T>,
) -> Result<[T; 8]> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    match weights {
        None => {
            let counts = failure_counts(samples, sn, load);
            let n = count::<T>(samples.len());
            Ok(counts.map(|c| count::<T>(c) / n))
        }
        Some(w) => {
            if w.len() != samples.len() {
                return Err(invalid(format!("{} weights for {} samples", w.len(), samples.len())));
            }
            let partial: Vec<[T; 8]> = samples
                .par_chunks(CHUNK)
                .zip(w.par_chunks(CHUNK))
                .map(|(s, w)| {
                    let mut acc = [T::zero(); 8];
                    for (s, &w) in s.iter().zip(w) {
                        if w == T::zero() {
                            continue;
                        }
                        let m = failure_mask(s, sn, load);
                        for (k, a) in acc.iter_mut().enumerate() {
                            if m >> k & 1 == 1 {
                                *a = *a + w;
                            }
                        }
                    }
                    acc
                })
                .collect();
            Ok(partial.into_iter().fold([T::zero(); 8], |mut acc, p| {
                for k in 0..8 {
                    acc[k] = acc[k] + p[k];
                }
                acc
            }))
        }
    }
}

/// Failure counts of all eight action sets.
pub fn failure_counts<T: Real>(samples: &[ParameterSample<T>], sn: &SnModel<T>, load: &LoadingConfig<T>) -> [usize; 8] {
    samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut c = [0usize; 8];
            for s in chunk {
                let m = failure_mask(s, sn, load);
                for (k, c) in c.iter_mut().enumerate() {
                    *c += (m >> k & 1) as usize;
                }
            }
            c
        })
        .reduce(|| [0; 8], |mut a, b| {
            for k in 0..8 {
                a[k] += b[k];
            }
            a
        })
}

/// Builds the decision table from per-action failure frequencies.
pub fn decide<T: Real>(
    actions: &[ActionSet],
    pf: &[T; 8],
    standard_errors: &[T; 8],
    cost: &CostModel<T>,
) -> Result<DecisionResult<T>> {
    let table: Vec<ActionEvaluation<T>> = actions
        .iter()
        .map(|&a| ActionEvaluation {
            action: a,
            pr_fail: FailureProbability { p: pf[a.index()], standard_error: standard_errors[a.index()] },
            mitigation_cost: cost.mitigation_cost(a),
            expected_utility: utility(pf[a.index()], a, cost),
        })
        .collect();
    let best = select_optimal(&table).ok_or_else(|| invalid("no candidate actions"))?;
    Ok(DecisionResult { a_star: table[best].action, e_u_star: table[best].expected_utility, table })
}

/// Expected utility of one action set under the problem's prior samples.
pub fn expected_utility<T: Real>(a: ActionSet, problem: &DecisionProblem<T>) -> Result<T> {
    let pf = crate::structural::pr_fail(&problem.samples, a, &problem.sn, &problem.load)?;
    Ok(utility(pf.p, a, &problem.cost))
}

/// Evaluates every candidate action and picks the best.
pub fn solve<T: Real>(problem: &DecisionProblem<T>) -> Result<DecisionResult<T>> {
    problem.validate()?;
    let n = problem.samples.len();
    let counts = failure_counts(&problem.samples, &problem.sn, &problem.load);
    let pf = counts.map(|c| FailureProbability::<T>::from_count(c, n));
    decide(&problem.actions, &pf.map(|f| f.p), &pf.map(|f| f.standard_error), &problem.cost)
}

/// Like [`solve`] on a weighted sample set (weights normalized to sum to one).
pub fn solve_weighted<T: Real>(
    samples: &[ParameterSample<T>],
    weights: &[T],
    actions: &[ActionSet],
    cost: &CostModel<T>,
    sn: &SnModel<T>,
    load: &LoadingConfig<T>,
) -> Result<DecisionResult<T>> {
    let pf = failure_frequencies(samples, Some(weights), sn, load)?;
    let ess = T::one() / weights.iter().fold(T::zero(), |acc, &w| acc + w * w);
    let se = pf.map(|p| (p * (T::one() - p) / ess).max(T::zero()).sqrt());
    decide(actions, &pf, &se, cost)
}
