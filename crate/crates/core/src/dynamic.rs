//! Multi-window maintenance planning.
//!
//! The single-window problem is repeated over successive windows with
//! fatigue damage carried forward by Miner's rule. Replacement and reduced
//! operation persist once taken; a repair strengthens the detail for the
//! window it is bought in (or permanently, see [`RepairPersistence`]).
//! Failure is absorbing: the failure cost is charged once and no mitigation
//! is bought after it.
//!
//! In the first window with no accumulated damage the fatigue check is the
//! single-window check (`log10 n ≥ log10 N`), so a one-window horizon
//! reproduces the static decision exactly.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::decision::{solve, CostModel, DecisionProblem};
use crate::error::{invalid, Error, Result};
use crate::scalar::{count, lit, Real};
use crate::structural::{
    apply_actions, cycle_factor, fatigue_log_demand, peak_stress, ActionSet, LoadingConfig, ParameterSample, SnModel,
};
use crate::voi::{
    check_degenerate, condition, outer_design, outer_observations, summarize, MeasurementPlan, Noise, OuterDraw, Route,
    VoiResult, VoiSettings,
};

/// How long a strengthening repair lasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RepairPersistence {
    /// Effective only in the window it is bought in.
    #[default]
    OneWindow,
    Permanent,
}

/// One action set per window.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PolicySequence {
    pub actions: Vec<ActionSet>,
}

impl PolicySequence {
    pub fn new(actions: Vec<ActionSet>) -> Self {
        Self { actions }
    }

    pub fn windows(&self) -> usize {
        self.actions.len()
    }

    /// Window labels joined with `>`, e.g. `repair>repair>none`.
    pub fn short_label(&self) -> String {
        self.actions.iter().map(|a| a.short_label()).collect::<Vec<_>>().join(">")
    }

    pub fn parse(label: &str) -> Option<Self> {
        label.split('>').map(ActionSet::parse).collect::<Option<Vec<_>>>().map(Self::new)
    }

    /// Sequence number `i` in base-8 enumeration, first window most significant.
    pub fn from_index(mut i: usize, windows: usize) -> Self {
        let mut actions = vec![ActionSet::NONE; windows];
        for slot in actions.iter_mut().rev() {
            *slot = ActionSet::from_index(i % 8);
            i /= 8;
        }
        Self { actions }
    }

    fn lex_key(&self) -> Vec<Vec<u8>> {
        self.actions.iter().map(|a| a.lex_key()).collect()
    }
}

impl fmt::Display for PolicySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.actions.iter().map(|a| a.to_string()).collect();
        write!(f, "{}", parts.join(" -> "))
    }
}

/// State of the detail at the end of a window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SystemState<T> {
    /// Miner damage sum.
    pub accumulated_damage: T,
    pub repaired: bool,
    pub replaced: bool,
    pub reduced: bool,
    pub failed: bool,
}

/// Dynamic-mode settings beyond the single-window problem.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DynamicRules {
    pub repair: RepairPersistence,
}

/// Per-window trace of one sample under one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout<T> {
    pub states: Vec<SystemState<T>>,
    /// Window (0-based) in which failure occurred.
    pub failed_in: Option<usize>,
    pub mitigation_cost: T,
    pub total_cost: T,
}

impl<T: Real> Rollout<T> {
    pub fn window_failed(&self) -> Vec<bool> {
        (0..self.states.len()).map(|k| self.failed_in == Some(k)).collect()
    }
}

/// The action set whose physical effect holds in a window.
fn effective(action: ActionSet, state: &SystemState<impl Real>, rules: &DynamicRules) -> ActionSet {
    ActionSet {
        repair: action.repair || (rules.repair == RepairPersistence::Permanent && state.repaired),
        replace: action.replace || state.replaced,
        reduce_operation: action.reduce_operation || state.reduced,
    }
}

/// Over-stress flag and per-window log fatigue demand for every effective configuration.
#[derive(Debug, Clone, Copy)]
struct WindowResponse<T> {
    over: u8,
    demand: [T; 8],
    /// Miner increment `10^demand`.
    increment: [T; 8],
}

fn window_response<T: Real>(s: &ParameterSample<T>, sn: &SnModel<T>, load: &LoadingConfig<T>) -> WindowResponse<T> {
    let mut over = 0u8;
    let mut demand = [T::neg_infinity(); 8];
    for a in ActionSet::ALL {
        let acted = apply_actions(s, a);
        let stress = peak_stress(acted.sigma_l, acted.scf);
        if stress > acted.sigma_y {
            over |= 1 << a.index();
        }
        demand[a.index()] = fatigue_log_demand(stress, load.annual_cycles * cycle_factor::<T>(a), sn, s.noise.scatter);
    }
    let increment = demand.map(|d| lit::<T>(10.0).powf(d));
    WindowResponse { over, demand, increment }
}

/// Advances one sample through one window; returns whether it fails there.
#[inline]
fn step<T: Real>(r: &WindowResponse<T>, config: ActionSet, damage: &mut T) -> bool {
    let over = r.over >> config.index() & 1 == 1;
    let inc = r.increment[config.index()];
    let fatigue = if *damage == T::zero() { r.demand[config.index()] >= T::zero() } else { *damage + inc >= T::one() };
    *damage = *damage + inc;
    over || fatigue
}

/// Simulates one sample under a sequence.
pub fn rollout<T: Real>(
    seq: &PolicySequence,
    s: &ParameterSample<T>,
    sn: &SnModel<T>,
    load: &LoadingConfig<T>,
    cost: &CostModel<T>,
    rules: &DynamicRules,
) -> Rollout<T> {
    let r = window_response(s, sn, load);
    let mut state = SystemState::<T>::default();
    let mut states = Vec::with_capacity(seq.windows());
    let mut failed_in = None;
    let mut mitigation = T::zero();
    for (k, &a) in seq.actions.iter().enumerate() {
        if failed_in.is_none() {
            mitigation = mitigation + cost.mitigation_cost(a);
            let config = effective(a, &state, rules);
            if step(&r, config, &mut state.accumulated_damage) {
                failed_in = Some(k);
                state.failed = true;
            }
            state.repaired |= a.repair;
            state.replaced |= a.replace;
            state.reduced |= a.reduce_operation;
        }
        states.push(state);
    }
    let fail_cost = if failed_in.is_some() { cost.c_fail } else { T::zero() };
    Rollout { states, failed_in, mitigation_cost: mitigation, total_cost: fail_cost + mitigation }
}

/// Expected outcome of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEvaluation<T> {
    pub sequence: PolicySequence,
    /// Probability of failure within the horizon.
    pub pr_fail: T,
    /// Expected mitigation spend (nothing is bought after failure).
    pub expected_mitigation: T,
    /// `pr_fail·c_fail + expected_mitigation`.
    pub expected_cost: T,
    /// Mitigation cost if every window is reached; used for tie-breaking.
    pub nominal_mitigation: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicResult<T> {
    /// All `8^windows` sequences in enumeration order.
    pub table: Vec<SequenceEvaluation<T>>,
    pub best: PolicySequence,
    pub expected_cost: T,
}

impl<T: Real> DynamicResult<T> {
    pub fn evaluation(&self, seq: &PolicySequence) -> Option<&SequenceEvaluation<T>> {
        self.table.iter().find(|e| &e.sequence == seq)
    }

    pub fn ranked(&self) -> Vec<SequenceEvaluation<T>> {
        let mut rows = self.table.clone();
        rows.sort_by(compare);
        rows
    }
}

/// Preference order: lower expected cost, then lower nominal mitigation
/// cost, then the member order of each window in turn.
fn compare<T: Real>(a: &SequenceEvaluation<T>, b: &SequenceEvaluation<T>) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    match a.expected_cost.partial_cmp(&b.expected_cost) {
        Some(Ordering::Equal) | None => {}
        Some(o) => return o,
    }
    match a.nominal_mitigation.partial_cmp(&b.nominal_mitigation) {
        Some(Ordering::Equal) | None => {}
        Some(o) => return o,
    }
    a.sequence.lex_key().cmp(&b.sequence.lex_key())
}

/// Probability mass accumulator: exact counts when unweighted.
#[derive(Clone, Copy)]
struct Mass<T> {
    count: usize,
    weight: T,
}

struct Tree<'a, T> {
    responses: &'a [WindowResponse<T>],
    weights: Option<&'a [T]>,
    cost: &'a CostModel<T>,
    rules: &'a DynamicRules,
    windows: usize,
    n: usize,
}

/// Per-sample state carried down the tree.
#[derive(Clone, Copy)]
struct Carry<T> {
    damage: T,
    alive: bool,
}

impl<T: Real> Tree<'_, T> {
    fn fraction(&self, m: Mass<T>) -> T {
        match self.weights {
            None => count::<T>(m.count) / count(self.n),
            Some(_) => m.weight,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        prefix: &mut Vec<ActionSet>,
        state: SystemState<T>,
        carry: &[Carry<T>],
        alive_mass: Mass<T>,
        failed_mass: Mass<T>,
        expected_mitigation: T,
        out: &mut Vec<SequenceEvaluation<T>>,
    ) {
        for a in ActionSet::ALL {
            let config = effective(a, &state, self.rules);
            let leaf = prefix.len() + 1 == self.windows;
            let mut next = if leaf { Vec::new() } else { carry.to_vec() };
            let mut newly = Mass { count: 0, weight: T::zero() };
            for (i, c) in carry.iter().enumerate() {
                if !c.alive {
                    continue;
                }
                let mut damage = c.damage;
                let fails = step(&self.responses[i], config, &mut damage);
                if !leaf {
                    next[i] = Carry { damage, alive: !fails };
                }
                if fails {
                    newly.count += 1;
                    if let Some(w) = self.weights {
                        newly.weight = newly.weight + w[i];
                    }
                }
            }
            // mitigation in this window is bought by every sample alive at its start
            let spend = if prefix.is_empty() {
                self.cost.mitigation_cost(a)
            } else {
                expected_mitigation + self.cost.mitigation_cost(a) * self.fraction(alive_mass)
            };
            let failed = Mass { count: failed_mass.count + newly.count, weight: failed_mass.weight + newly.weight };
            let alive = Mass { count: alive_mass.count - newly.count, weight: alive_mass.weight - newly.weight };
            let child = SystemState {
                accumulated_damage: T::zero(),
                repaired: state.repaired || a.repair,
                replaced: state.replaced || a.replace,
                reduced: state.reduced || a.reduce_operation,
                failed: false,
            };
            prefix.push(a);
            if prefix.len() == self.windows {
                let pf = self.fraction(failed);
                let sequence = PolicySequence::new(prefix.clone());
                let nominal = sequence.actions.iter().fold(T::zero(), |acc, &a| acc + self.cost.mitigation_cost(a));
                out.push(SequenceEvaluation {
                    sequence,
                    pr_fail: pf,
                    expected_mitigation: spend,
                    expected_cost: pf * self.cost.c_fail + spend,
                    nominal_mitigation: nominal,
                });
            } else {
                self.descend(prefix, child, &next, alive, failed, spend, out);
            }
            prefix.pop();
        }
    }
}

fn evaluate_all<T: Real>(
    samples: &[ParameterSample<T>],
    weights: Option<&[T]>,
    cost: &CostModel<T>,
    sn: &SnModel<T>,
    load: &LoadingConfig<T>,
    rules: &DynamicRules,
) -> Result<DynamicResult<T>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let windows = load.windows;
    let responses: Vec<WindowResponse<T>> = samples.par_iter().map(|s| window_response(s, sn, load)).collect();
    let tree = Tree { responses: &responses, weights, cost, rules, windows, n: samples.len() };
    let total = Mass { count: samples.len(), weight: weights.map_or(T::one(), |w| w.iter().fold(T::zero(), |a, &b| a + b)) };
    let start = vec![Carry { damage: T::zero(), alive: true }; samples.len()];
    let mut table = Vec::with_capacity(8usize.pow(windows as u32));
    tree.descend(&mut Vec::new(), SystemState::default(), &start, total, Mass { count: 0, weight: T::zero() }, T::zero(), &mut table);
    let best = table.iter().min_by(|a, b| compare(a, b)).expect("non-empty table").clone();
    Ok(DynamicResult { best: best.sequence, expected_cost: best.expected_cost, table })
}

/// Finds the cheapest action sequence over `p.load.windows` windows by
/// enumerating all `8^windows` sequences on the problem's samples.
pub fn solve_dynamic<T: Real>(p: &DecisionProblem<T>, rules: &DynamicRules) -> Result<DynamicResult<T>> {
    p.validate()?;
    if p.load.windows > 6 {
        return Err(invalid(format!("{} windows would enumerate 8^{} sequences", p.load.windows, p.load.windows)));
    }
    evaluate_all(&p.samples, None, &p.cost, &p.sn, &p.load, rules)
}

/// Weighted variant of [`solve_dynamic`] for conditioned sample sets.
pub fn solve_dynamic_weighted<T: Real>(
    samples: &[ParameterSample<T>],
    weights: &[T],
    cost: &CostModel<T>,
    sn: &SnModel<T>,
    load: &LoadingConfig<T>,
    rules: &DynamicRules,
) -> Result<DynamicResult<T>> {
    if weights.len() != samples.len() {
        return Err(invalid(format!("{} weights for {} samples", weights.len(), samples.len())));
    }
    evaluate_all(samples, Some(weights), cost, sn, load, rules)
}

/// How often each sequence was optimal across outer draws.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathFrequencyTable {
    /// Sorted by descending count, then sequence order.
    pub entries: Vec<(PolicySequence, usize)>,
}

impl PathFrequencyTable {
    pub fn from_sequences<'a>(seqs: impl IntoIterator<Item = &'a PolicySequence>) -> Self {
        let mut counts: BTreeMap<&PolicySequence, usize> = BTreeMap::new();
        for s in seqs {
            *counts.entry(s).or_default() += 1;
        }
        let mut entries: Vec<_> = counts.into_iter().map(|(s, c)| (s.clone(), c)).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.lex_key().cmp(&b.0.lex_key())));
        Self { entries }
    }

    pub fn total(&self) -> usize {
        self.entries.iter().map(|e| e.1).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicVoiResult<T> {
    /// `draws[j].action` holds the first-window action of draw `j`.
    pub voi: VoiResult<T>,
    pub prior_best: PolicySequence,
    /// Optimal sequence of each outer draw (prior sequence for degenerate draws).
    pub sequences: Vec<PolicySequence>,
    pub paths: PathFrequencyTable,
}

/// Value of the data in `plan` for the multi-window problem.
pub fn dynamic_voi<T: Real>(
    plan: &MeasurementPlan<T>,
    p: &DecisionProblem<T>,
    rules: &DynamicRules,
    n_outer: usize,
    seed: u64,
    settings: &VoiSettings,
) -> Result<DynamicVoiResult<T>> {
    if n_outer == 0 {
        return Err(invalid("n_outer must be ≥ 1"));
    }
    let prior = solve_dynamic(p, rules)?;
    let e_u_prior = -prior.expected_cost;
    let design = outer_design(n_outer, seed)?;
    let outcomes: Vec<(OuterDraw<T>, PolicySequence)> = (0..n_outer)
        .into_par_iter()
        .map(|j| {
            let (_, obs) = outer_observations(&p.priors, plan, &design, j)?;
            let z: Vec<T> = obs.iter().map(|o| o.z).collect();
            let (post, route) = if plan.is_empty() {
                (None, None)
            } else {
                match condition(&p.samples, &obs, p.priors.rho, settings) {
                    Ok(post) => {
                        let route = Some(post.route);
                        (Some(post), route)
                    }
                    Err(Error::DegeneratePosterior { .. }) => {
                        let draw = OuterDraw {
                            observations: z,
                            e_u: T::nan(),
                            action: prior.best.actions[0],
                            ess: T::zero(),
                            route: None,
                            degenerate: true,
                        };
                        return Ok((draw, prior.best.clone()));
                    }
                    Err(e) => return Err(e),
                }
            };
            let (r, ess) = match &post {
                Some(post) => (
                    solve_dynamic_weighted(&post.samples, &post.weights, &p.cost, &p.sn, &p.load, rules)?,
                    post.ess,
                ),
                None => (prior.clone(), count(p.samples.len())),
            };
            let draw = OuterDraw {
                observations: z,
                e_u: -r.expected_cost,
                action: r.best.actions[0],
                ess,
                route,
                degenerate: false,
            };
            Ok((draw, r.best))
        })
        .collect::<Result<_>>()?;
    let (draws, sequences): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let degenerate = draws.iter().filter(|d| d.degenerate).count();
    check_degenerate(degenerate, n_outer, settings)?;
    let fallbacks = if plan.sources().iter().any(|s| matches!(s.noise, Noise::Gaussian(_))) {
        draws.iter().filter(|d| d.route == Some(Route::Proposal)).count()
    } else {
        0
    };
    let (mean, se) = if plan.is_empty() {
        (e_u_prior, T::zero())
    } else {
        let (m, se, _) = summarize(draws.iter().filter(|d| !d.degenerate).map(|d| d.e_u))?;
        (m, se)
    };
    let paths = PathFrequencyTable::from_sequences(&sequences);
    Ok(DynamicVoiResult {
        voi: VoiResult {
            plan: plan.label(),
            e_u_prior,
            prior_action: prior.best.actions[0],
            e_u_preposterior: mean,
            voi: if plan.is_empty() { T::zero() } else { mean - e_u_prior },
            mc_standard_error: se,
            n_outer,
            degenerate,
            fallbacks,
            draws,
        },
        prior_best: prior.best,
        sequences,
        paths,
    })
}

/// Checks that a one-window dynamic solve reproduces the static decision.
pub fn matches_static<T: Real>(p: &DecisionProblem<T>) -> Result<bool> {
    let mut one = p.clone();
    one.load.windows = 1;
    let d = solve_dynamic(&one, &DynamicRules::default())?;
    let s = solve(&one)?;
    Ok(d.best.actions == [s.a_star] && -d.expected_cost == s.e_u_star)
}
