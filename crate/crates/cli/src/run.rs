//! Analysis dispatch: builds the decision problem from a [`RunConfig`] and
//! turns engine results into payload tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::info;
use riskvoi::decision::{self, DecisionResult};
use riskvoi::dynamic::{self, DynamicVoiResult};
use riskvoi::structural::{calibrate_annual_cycles, draw_parameter_samples, pr_to_beta};
use riskvoi::voi::{self, isotonic_non_increasing, OuterDraw, SweepPoint};
use riskvoi::{ActionSet, DecisionProblem, MeasurementPlan, VoiResult};

use crate::config::{Mode, RunConfig};
use crate::error::CliError;
use crate::record::{num, ResultRecord, Table};

type Metrics = BTreeMap<String, f64>;

/// Row order of the published decision table; `replace+reduce` follows.
pub const DECISION_TABLE_ORDER: [&str; 8] =
    ["none", "repair", "reduce", "replace", "repair+reduce", "repair+replace", "all", "replace+reduce"];

/// Number of rows shown in the human summary of the decision table.
pub const SUMMARY_ROWS: usize = 7;

fn action_of(label: &str) -> ActionSet {
    if label == "all" { ActionSet::from_index(7) } else { ActionSet::parse(label).expect("static label") }
}

fn action_label(a: ActionSet) -> String {
    if a == ActionSet::from_index(7) { "all".into() } else { a.short_label() }
}

/// Prior sample set of size `n` with the configured (or calibrated) loading.
pub fn build_problem(cfg: &RunConfig, n: usize, metrics: &mut Metrics) -> Result<DecisionProblem<f64>, CliError> {
    let priors = cfg.priors()?;
    priors.validate().map_err(|e| CliError::Validation { key: "priors.rho".into(), message: e.to_string() })?;
    let sn = cfg.sn_model();
    let mut load = cfg.loading();
    if let Some(target) = cfg.load.calibrate_to {
        let fit_set = draw_parameter_samples(&priors, cfg.analysis.n_samples, cfg.analysis.seed)?;
        let c = calibrate_annual_cycles(&fit_set, &sn, load.windows, target)?;
        info!("calibrated annual cycles {} (pf {})", c.annual_cycles, c.achieved.p);
        load.annual_cycles = c.annual_cycles;
    }
    metrics.insert("annual_cycles".into(), load.annual_cycles);
    let samples = draw_parameter_samples(&priors, n, cfg.analysis.seed)?;
    Ok(DecisionProblem::new(priors, samples, cfg.cost_model(), sn, load)?)
}

/// Runs the analysis selected by `cfg.analysis.mode`.
pub fn run(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    cfg.validate()?;
    let mut metrics = Metrics::new();
    let tables = match cfg.analysis.mode {
        Mode::Prior => run_prior(cfg, &mut metrics)?,
        Mode::Voi => run_voi(cfg, &mut metrics)?,
        Mode::Subsets => run_subsets(cfg, &mut metrics)?,
        Mode::Sweep => run_sweep(cfg, &mut metrics)?,
        Mode::Dynamic => run_dynamic(cfg, &mut metrics)?,
    };
    Ok(ResultRecord::new(cfg, metrics, tables))
}

pub fn decision_table(r: &DecisionResult<f64>) -> Result<Table, CliError> {
    let mut t = Table::new(
        "decision_table",
        &["action", "pr_fail", "pr_fail_se", "beta", "mitigation_cost", "expected_cost", "optimal"],
    );
    for label in DECISION_TABLE_ORDER {
        let a = action_of(label);
        let row = r.row(a).ok_or_else(|| CliError::Unsupported(format!("action {label} missing")))?;
        t.push(vec![
            label.into(),
            num(row.pr_fail.p),
            num(row.pr_fail.standard_error),
            pr_to_beta(row.pr_fail.p)?.to_string(),
            num(row.mitigation_cost),
            num(row.expected_cost()),
            (a == r.a_star).to_string(),
        ]);
    }
    Ok(t)
}

fn run_prior(cfg: &RunConfig, m: &mut Metrics) -> Result<Vec<Table>, CliError> {
    let p = build_problem(cfg, cfg.analysis.n_samples, m)?;
    let r = decision::solve(&p)?;
    m.insert("n_samples".into(), p.samples.len() as f64);
    m.insert("pr_fail_none".into(), r.row(ActionSet::NONE).map_or(f64::NAN, |x| x.pr_fail.p));
    m.insert("expected_cost".into(), -r.e_u_star);
    Ok(vec![decision_table(&r)?])
}

fn voi_summary_table(results: &[&VoiResult<f64>]) -> Table {
    let mut t = Table::new(
        "voi_summary",
        &[
            "plan",
            "e_u_prior",
            "prior_action",
            "e_u_preposterior",
            "voi",
            "standard_error",
            "n_outer",
            "degenerate",
            "fallbacks",
        ],
    );
    for r in results {
        t.push(vec![
            r.plan.clone(),
            num(r.e_u_prior),
            action_label(r.prior_action),
            num(r.e_u_preposterior),
            num(r.voi),
            num(r.mc_standard_error),
            r.n_outer.to_string(),
            r.degenerate.to_string(),
            r.fallbacks.to_string(),
        ]);
    }
    t
}

fn draws_table(
    name: &str,
    plan: &MeasurementPlan<f64>,
    draws: &[OuterDraw<f64>],
    sequences: Option<&[riskvoi::PolicySequence]>,
) -> Table {
    let mut headers = vec!["draw".to_string()];
    headers.extend(plan.sources().iter().map(|s| format!("z_{}", s.kind.label())));
    headers.extend(["inner_expected_cost", "action", "ess", "route"].map(String::from));
    if sequences.is_some() {
        headers.push("sequence".into());
    }
    let mut t = Table::with_headers(name, headers);
    for (j, d) in draws.iter().enumerate() {
        let mut row = vec![j.to_string()];
        row.extend(d.observations.iter().map(|&z| num(z)));
        row.push(num(-d.e_u));
        row.push(if d.degenerate { "degenerate".into() } else { action_label(d.action) });
        row.push(num(d.ess));
        row.push(d.route.map_or_else(|| "prior".into(), |r| r.to_string()));
        if let Some(seqs) = sequences {
            row.push(seqs[j].short_label());
        }
        t.push(row);
    }
    t
}

fn insert_voi_metrics(m: &mut Metrics, r: &VoiResult<f64>) {
    m.insert("voi".into(), r.voi);
    m.insert("standard_error".into(), r.mc_standard_error);
    m.insert("e_u_prior".into(), r.e_u_prior);
    m.insert("e_u_preposterior".into(), r.e_u_preposterior);
    m.insert("degenerate".into(), r.degenerate as f64);
    m.insert("fallbacks".into(), r.fallbacks as f64);
}

fn run_voi(cfg: &RunConfig, m: &mut Metrics) -> Result<Vec<Table>, CliError> {
    let p = build_problem(cfg, cfg.analysis.n_inner, m)?;
    let plan = cfg.plan()?;
    let r = voi::voi_with(&plan, &p, cfg.analysis.n_outer, cfg.analysis.seed, &cfg.voi_settings())?;
    insert_voi_metrics(m, &r);
    Ok(vec![voi_summary_table(&[&r]), draws_table("voi_draws", &plan, &r.draws, None)])
}

fn run_subsets(cfg: &RunConfig, m: &mut Metrics) -> Result<Vec<Table>, CliError> {
    let p = build_problem(cfg, cfg.analysis.n_inner, m)?;
    let rs = voi::voi_all_subsets_with(&p, cfg.analysis.n_outer, cfg.analysis.seed, &cfg.voi_settings())?;
    let mut t = Table::new("subset_voi", &["subset", "voi", "standard_error", "e_u_preposterior", "degenerate"]);
    for r in &rs {
        t.push(vec![
            r.plan.clone(),
            num(r.voi),
            num(r.mc_standard_error),
            num(r.e_u_preposterior),
            r.degenerate.to_string(),
        ]);
        m.insert(format!("voi_{}", r.plan), r.voi);
    }
    Ok(vec![t, voi_summary_table(&rs.iter().collect::<Vec<_>>())])
}

fn sweep_table(points: &[SweepPoint<f64>]) -> Table {
    let values: Vec<f64> = points.iter().map(|s| s.result.voi).collect();
    let weights: Vec<f64> = points
        .iter()
        .map(|s| {
            let se = s.result.mc_standard_error;
            if se > 0.0 { 1.0 / (se * se) } else { 1e12 }
        })
        .collect();
    let fit = isotonic_non_increasing(&values, &weights);
    let mut t =
        Table::new("sweep", &["epsilon", "voi", "standard_error", "isotonic_fit", "fallbacks", "degenerate"]);
    for (s, f) in points.iter().zip(fit) {
        t.push(vec![
            num(s.epsilon),
            num(s.result.voi),
            num(s.result.mc_standard_error),
            num(f),
            s.result.fallbacks.to_string(),
            s.result.degenerate.to_string(),
        ]);
    }
    t
}

fn run_sweep(cfg: &RunConfig, m: &mut Metrics) -> Result<Vec<Table>, CliError> {
    let p = build_problem(cfg, cfg.analysis.n_inner, m)?;
    let points = voi::voi_sensitivity_with(
        cfg.sweep_kind(),
        &cfg.analysis.epsilons,
        &p,
        cfg.analysis.n_outer,
        cfg.analysis.seed,
        &cfg.voi_settings(),
    )?;
    for s in &points {
        m.insert(format!("voi_eps_{}", num(s.epsilon)), s.result.voi);
    }
    Ok(vec![sweep_table(&points)])
}

fn run_dynamic(cfg: &RunConfig, m: &mut Metrics) -> Result<Vec<Table>, CliError> {
    let mut dyn_cfg = cfg.clone();
    dyn_cfg.load.windows = cfg.dynamic.windows;
    let rules = cfg.dynamic_rules();
    let p = build_problem(&dyn_cfg, cfg.analysis.n_samples, m)?;
    let prior = dynamic::solve_dynamic(&p, &rules)?;
    m.insert("expected_cost".into(), prior.expected_cost);
    m.insert("matches_static".into(), if dynamic::matches_static(&p)? { 1.0 } else { 0.0 });
    let mut seq = Table::new(
        "dynamic_sequences",
        &["rank", "sequence", "pr_fail", "expected_mitigation", "expected_cost", "nominal_mitigation"],
    );
    for (i, e) in prior.ranked().iter().enumerate() {
        seq.push(vec![
            (i + 1).to_string(),
            e.sequence.short_label(),
            num(e.pr_fail),
            num(e.expected_mitigation),
            num(e.expected_cost),
            num(e.nominal_mitigation),
        ]);
    }
    let mut tables = vec![seq];
    let plan = cfg.plan()?;
    if !plan.is_empty() {
        let inner = build_problem(&dyn_cfg, cfg.analysis.n_inner, &mut Metrics::new())?;
        let r: DynamicVoiResult<f64> = dynamic::dynamic_voi(
            &plan,
            &inner,
            &rules,
            cfg.analysis.n_outer,
            cfg.analysis.seed,
            &cfg.voi_settings(),
        )?;
        insert_voi_metrics(m, &r.voi);
        tables.push(voi_summary_table(&[&r.voi]));
        tables.push(draws_table("dynamic_draws", &plan, &r.voi.draws, Some(&r.sequences)));
        let mut paths = Table::new("path_frequencies", &["sequence", "count"]);
        for (s, c) in &r.paths.entries {
            paths.push(vec![s.short_label(), c.to_string()]);
        }
        tables.push(paths);
    }
    Ok(tables)
}

/// Human-readable digest of a record.
pub fn summary(record: &ResultRecord) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "riskvoi {} | mode {} | seed {} | config {}",
        record.version,
        record.mode.as_str(),
        record.seed,
        &record.config_sha256[..12]
    );
    if let Some(c) = record.metric("annual_cycles") {
        let _ = writeln!(s, "annual cycles: {c}");
    }
    match record.mode {
        Mode::Prior => {
            if let Some(t) = record.table("decision_table") {
                let _ = writeln!(s, "{:<16} {:>10} {:>8} {:>10} {:>10}", "action", "pr_fail", "beta", "mitigation", "E[cost]");
                for r in t.rows.iter().take(SUMMARY_ROWS) {
                    let mark = if r[6] == "true" { " *" } else { "" };
                    let _ = writeln!(
                        s,
                        "{:<16} {:>10.4} {:>8.3} {:>10.4} {:>10.4}{mark}",
                        r[0],
                        r[1].parse::<f64>().unwrap_or(f64::NAN),
                        r[3].parse::<f64>().unwrap_or(f64::NAN),
                        r[4].parse::<f64>().unwrap_or(f64::NAN),
                        r[5].parse::<f64>().unwrap_or(f64::NAN),
                    );
                }
            }
        }
        Mode::Voi => {
            if let Some(t) = record.table("voi_summary") {
                for r in &t.rows {
                    let _ = writeln!(s, "plan {}: VoI {} ± {} (prior action {})", r[0], r[4], r[5], r[2]);
                }
            }
        }
        Mode::Subsets => {
            if let Some(t) = record.table("subset_voi") {
                let _ = writeln!(s, "{:<14} {:>10} {:>10}", "subset", "VoI", "SE");
                for r in &t.rows {
                    let v: f64 = r[1].parse().unwrap_or(f64::NAN);
                    let e: f64 = r[2].parse().unwrap_or(f64::NAN);
                    let _ = writeln!(s, "{:<14} {v:>10.5} {e:>10.5}", r[0]);
                }
            }
        }
        Mode::Sweep => {
            if let Some(t) = record.table("sweep") {
                let _ = writeln!(s, "{:>10} {:>10} {:>10} {:>10}", "epsilon", "VoI", "SE", "isotonic");
                for r in &t.rows {
                    let f = |i: usize| r[i].parse::<f64>().unwrap_or(f64::NAN);
                    let _ = writeln!(s, "{:>10} {:>10.5} {:>10.5} {:>10.5}", r[0], f(1), f(2), f(3));
                }
            }
        }
        Mode::Dynamic => {
            if let Some(t) = record.table("dynamic_sequences") {
                for r in t.rows.iter().take(5) {
                    let _ = writeln!(s, "#{:<3} {:<32} E[cost] {}", r[0], r[1], r[4]);
                }
            }
            if let (Some(v), Some(e)) = (record.metric("voi"), record.metric("standard_error")) {
                let _ = writeln!(s, "dynamic VoI {v} ± {e}");
            }
            if let Some(t) = record.table("path_frequencies") {
                for r in &t.rows {
                    let _ = writeln!(s, "  {:<32} {}", r[0], r[1]);
                }
            }
        }
    }
    s
}

