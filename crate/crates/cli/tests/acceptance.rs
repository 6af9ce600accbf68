//! Acceptance suite. Each criterion is one ignored test that prints a
//! `PASS`/`FAIL` line per check and a verdict line, then asserts.
//!
//! ```text
//! cargo test --release -p riskvoi-cli --test acceptance -- --ignored --nocapture --test-threads=1
//! ```

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riskvoi::decision::{self, select_optimal, utility, ActionEvaluation};
use riskvoi::distributions::{lhs_sample, CopulaSpec, MarginalSpec};
use riskvoi::dynamic::{dynamic_voi, matches_static, solve_dynamic};
use riskvoi::structural::{draw_parameter_samples, FailureProbability, LatentNoise};
use riskvoi::voi::{
    combination_standard_error, condition_imperfect, isotonic_non_increasing, voi_all_subsets, voi_sensitivity,
};
use riskvoi::{
    ActionSet, CostModel, DataSource, DecisionProblem, DynamicRules, LoadingConfig, MeasurementPlan, Priors, SnModel,
    SourceKind, VoiSettings,
};
use riskvoi_cli::{run, write_outputs, Mode, RunConfig, DEFAULT_ANNUAL_CYCLES};

const N_PRIOR: usize = 100_000;
const N_INNER: usize = 20_000;
const N_OUTER: usize = 2_000;
const SEED: u64 = 42;

// subset masks: bit 0 test, bit 1 insp, bit 2 shm
const TEST: usize = 1;
const INSP: usize = 2;
const SHM: usize = 4;

struct Criterion {
    id: u8,
    title: &'static str,
    failed: Vec<String>,
}

impl Criterion {
    fn new(id: u8, title: &'static str) -> Self {
        println!("== criterion {id}: {title}");
        Self { id, title, failed: Vec::new() }
    }

    fn check(&mut self, name: &str, ok: bool, detail: impl AsRef<str>) {
        println!("  [{}] {name}: {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
        if !ok {
            self.failed.push(name.to_string());
        }
    }

    fn note(&self, name: &str, detail: impl AsRef<str>) {
        println!("  [INFO] {name}: {}", detail.as_ref());
    }

    fn within(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        self.check(name, (value - target).abs() <= tol, format!("{value:.5} vs {target} ± {tol}"));
    }

    fn finish(self) {
        let verdict = if self.failed.is_empty() { "PASS" } else { "FAIL" };
        println!("CRITERION {} {verdict}: {} {:?}", self.id, self.title, self.failed);
        assert!(self.failed.is_empty(), "criterion {} failed: {:?}", self.id, self.failed);
    }
}

fn problem(n: usize, seed: u64, windows: usize) -> DecisionProblem<f64> {
    DecisionProblem::from_priors(
        Priors::bridge(),
        n,
        seed,
        CostModel::default(),
        SnModel::class_d(),
        LoadingConfig::new(DEFAULT_ANNUAL_CYCLES, windows).unwrap(),
    )
    .unwrap()
}

fn timed<R>(f: impl FnOnce() -> R) -> (R, Duration) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed())
}

#[test]
#[ignore = "acceptance"]
fn criterion_1_prior_decision_table() {
    let mut c = Criterion::new(1, "prior decision table");
    let mut cfg = RunConfig::default();
    cfg.analysis.mode = Mode::Prior;
    cfg.analysis.n_samples = N_PRIOR;
    let (record, elapsed) = timed(|| run(&cfg).unwrap());
    let t = record.table("decision_table").unwrap();
    let pf = t.numbers("pr_fail").unwrap();
    let cost = t.numbers("expected_cost").unwrap();
    let labels: Vec<&str> = t.rows.iter().map(|r| r[0].as_str()).collect();
    let at = |l: &str| labels.iter().position(|x| *x == l).unwrap();
    c.within("no-action Pr(fail)", pf[at("none")], 0.0357, 0.010);
    c.check("replace Pr(fail) ≤ 0.002", pf[at("replace")] <= 0.002, format!("{}", pf[at("replace")]));
    // published order of the seven total costs, cheapest first
    let published = ["none", "repair", "reduce", "replace", "repair+reduce", "repair+replace", "all"];
    let mut ours: Vec<&str> = published.to_vec();
    ours.sort_by(|a, b| cost[at(a)].total_cmp(&cost[at(b)]));
    c.check("cost ranking", ours == published, format!("{ours:?}"));
    let optimal: Vec<&str> = t.rows.iter().filter(|r| r[6] == "true").map(|r| r[0].as_str()).collect();
    c.check("a* = no action", optimal == ["none"], format!("{optimal:?}"));
    c.check("runtime ≤ 30 s", elapsed <= Duration::from_secs(30), format!("{elapsed:.2?}"));
    c.finish();
}

#[test]
#[ignore = "acceptance"]
fn criterion_2_perfect_information_voi() {
    let mut c = Criterion::new(2, "perfect-information VoI");
    let p = problem(N_INNER, SEED, 1);
    let (subsets, elapsed) = timed(|| voi_all_subsets(&p, N_OUTER, SEED).unwrap());
    for r in &subsets {
        println!("  {:<14} voi {:.5} ± {:.5}", r.plan, r.voi, r.mc_standard_error);
    }
    let (test, insp, shm, both) = (&subsets[TEST], &subsets[INSP], &subsets[SHM], &subsets[INSP | SHM]);
    c.within("VoPInsp", insp.voi, 0.0332, 0.012);
    c.within("VoPSHM", shm.voi, 0.0167, 0.010);
    c.within("VoPTest", test.voi, 0.0012, 0.005);
    c.within("VoI(Insp+SHM)", both.voi, 0.0334, 0.012);
    let gap = insp.voi + shm.voi - both.voi;
    let se = combination_standard_error(&[(1.0, insp), (1.0, shm), (-1.0, both)]).unwrap();
    c.check(
        "sub-additive by ≥ 2 SE",
        gap >= 2.0 * se,
        format!("VoPInsp + VoPSHM − VoI(Insp+SHM) = {gap:.5}, SE {se:.5}"),
    );
    // the ordering clause only binds when the criterion 1 calibration misses
    c.note(
        "ordering insp > shm > test ≥ 0",
        format!(
            "{} ({:.5}, {:.5}, {:.5})",
            insp.voi > shm.voi && shm.voi > test.voi && test.voi >= 0.0,
            insp.voi,
            shm.voi,
            test.voi
        ),
    );
    c.check("runtime ≤ 10 min", elapsed <= Duration::from_secs(600), format!("{elapsed:.1?} for all subsets"));
    c.finish();
}

#[test]
#[ignore = "acceptance"]
fn criterion_3_sensitivity_sweep() {
    let mut c = Criterion::new(3, "sensitivity sweep");
    let p = problem(N_INNER, SEED, 1);
    let eps = [1e-3, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 1e3];
    let pts = voi_sensitivity(SourceKind::Shm, &eps, &p, N_OUTER, SEED).unwrap();
    let perfect =
        riskvoi::voi::voi(&MeasurementPlan::perfect(&[SourceKind::Shm]).unwrap(), &p, N_OUTER, SEED).unwrap();
    for s in &pts {
        println!("  ε {:>7} voi {:.5} ± {:.5}", s.epsilon, s.result.voi, s.result.mc_standard_error);
    }
    let values: Vec<f64> = pts.iter().map(|s| s.result.voi).collect();
    let weights: Vec<f64> = pts.iter().map(|s| 1.0 / s.result.mc_standard_error.max(1e-12).powi(2)).collect();
    let fit = isotonic_non_increasing(&values, &weights);
    for (s, f) in pts.iter().zip(&fit) {
        let se = s.result.mc_standard_error;
        c.check(
            &format!("monotone fit at ε = {}", s.epsilon),
            (s.result.voi - f).abs() <= 2.0 * se,
            format!("voi {:.5}, fit {f:.5}, SE {se:.5}", s.result.voi),
        );
    }
    for w in pts.windows(2) {
        let (a, b) = (&w[0].result, &w[1].result);
        let se = combination_standard_error(&[(1.0, b), (-1.0, a)]).unwrap();
        c.note(
            &format!("paired step {} → {}", w[0].epsilon, w[1].epsilon),
            format!("{:+.5}, paired SE {se:.5}", b.voi - a.voi),
        );
    }
    let lo = &pts[0].result;
    c.check(
        "voi(1e-3) ≈ perfect SHM",
        (lo.voi - perfect.voi).abs() <= 2.0 * lo.mc_standard_error,
        format!("{:.5} vs {:.5}, SE {:.5}", lo.voi, perfect.voi, lo.mc_standard_error),
    );
    let hi = &pts[pts.len() - 1].result;
    c.check(
        "voi(1e3) ≈ 0",
        hi.voi.abs() <= 2.0 * hi.mc_standard_error,
        format!("{:.6}, SE {:.6}", hi.voi, hi.mc_standard_error),
    );
    c.finish();
}

#[test]
#[ignore = "acceptance"]
fn criterion_4_dynamic_properties() {
    let mut c = Criterion::new(4, "dynamic planning");
    let rules = DynamicRules::default();
    let one = problem(N_PRIOR, SEED, 1);
    c.check("one window equals static solve", matches_static(&one).unwrap(), "exact equality");
    let mut best = Vec::new();
    for seed in 1..=3 {
        let p = problem(N_PRIOR, seed, 3);
        let r = solve_dynamic(&p, &rules).unwrap();
        println!("  seed {seed}: {} at {:.5}", r.best.short_label(), r.expected_cost);
        best.push(r.best.short_label());
    }
    c.check("prior-optimal sequence stable across seeds", best.windows(2).all(|w| w[0] == w[1]), format!("{best:?}"));
    let n_outer = 200;
    let inner = problem(N_INNER, SEED, 3);
    let plan = MeasurementPlan::perfect(&[SourceKind::Shm]).unwrap();
    let r = dynamic_voi(&plan, &inner, &rules, n_outer, SEED, &VoiSettings::default()).unwrap();
    for (s, k) in &r.paths.entries {
        println!("  path {:<32} {k}", s.short_label());
    }
    c.check("path counts partition n_outer", r.paths.total() == n_outer, format!("{} of {n_outer}", r.paths.total()));
    c.check(
        "dynamic VoI ≥ 0 within 4 SE",
        r.voi.voi >= -4.0 * r.voi.mc_standard_error,
        format!("{:.5} ± {:.5}", r.voi.voi, r.voi.mc_standard_error),
    );
    c.finish();
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
#[ignore = "acceptance"]
fn criterion_5_statistical_oracles() {
    let mut c = Criterion::new(5, "statistical-core oracles");
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut open01 = move || -> f64 { rng.sample(rand::distr::Open01) };

    let shapes = [(1, 1), (2, 5), (7, 3), (100, 10), (1000, 13), (4096, 2), (100_000, 10)];
    let stratified = shapes.iter().all(|&(n, d)| {
        let m = lhs_sample(n, d, (n * 31 + d) as u64).unwrap();
        (0..d).all(|j| {
            let mut hit = vec![false; n];
            m.column(j).all(|v| {
                let k = ((v * n as f64) as usize).min(n - 1);
                !std::mem::replace(&mut hit[k], true)
            })
        })
    });
    c.check("LHS stratification", stratified, format!("{} shapes", shapes.len()));

    let cop = CopulaSpec::bivariate(
        MarginalSpec::gamma(2.0, 0.5).unwrap(),
        MarginalSpec::lognormal(400.0, 10.0).unwrap(),
        2.0 / 3.0,
    )
    .unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for _ in 0..100_000 {
        let x = cop.sample(&[open01(), open01()]).unwrap();
        a.push(x[0]);
        b.push(x[1]);
    }
    c.within("copula Spearman", pearson(&ranks(&a), &ranks(&b)), 0.6490, 0.02);

    let mut worst: f64 = 0.0;
    for (m, sd) in [(6.0, 3.0), (10.0, 3.0), (400.0, 20.0)] {
        let spec = MarginalSpec::lognormal(m, sd).unwrap();
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| spec.quantile(open01()).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let s = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        worst = worst.max(((mean - m) / m).abs()).max(((s - sd) / sd).abs());
    }
    c.check("lognormal moment round-trip", worst <= 0.01, format!("worst relative error {worst:.4}"));

    // σ_L pinned to μ ~ N(50, 5), observed 60 with noise sd 5: posterior N(55, 12.5)
    let mut samples = draw_parameter_samples::<f64>(&Priors::bridge(), 40_000, 12).unwrap();
    for s in &mut samples {
        s.sd_sigma_l = 1e-9;
        s.sigma_l = s.mu_sigma_l;
        s.noise = LatentNoise { load: 0.0, ..s.noise };
    }
    let post = condition_imperfect(&samples, DataSource::gaussian(SourceKind::Shm, 5.0).unwrap(), 60.0, 2.0 / 3.0)
        .unwrap();
    let mean = post.mean(|s| s.mu_sigma_l);
    let tol = 3.0 * 12.5_f64.sqrt() / post.ess.sqrt();
    c.within("conjugate posterior mean", mean, 55.0, tol);

    let mut agree = 0;
    for _ in 0..1000 {
        let cost = CostModel {
            c_fail: 10.0 * open01(),
            c_repair: open01(),
            c_replace: open01(),
            c_reduce: open01(),
            c_site_visit: 0.2 * open01(),
            site_visit_for_reduce: open01() < 0.5,
        };
        let rows: Vec<ActionEvaluation<f64>> = ActionSet::ALL
            .iter()
            .map(|&a| {
                let p = open01();
                ActionEvaluation {
                    action: a,
                    pr_fail: FailureProbability { p, standard_error: 0.0 },
                    mitigation_cost: cost.mitigation_cost(a),
                    expected_utility: utility(p, a, &cost),
                }
            })
            .collect();
        let brute = (0..rows.len())
            .fold(0, |best, i| if rows[i].expected_utility > rows[best].expected_utility { i } else { best });
        agree += usize::from(select_optimal(&rows) == Some(brute));
    }
    c.check("argmax equals brute force", agree == 1000, format!("{agree} of 1000 tables"));

    let p = problem(5_000, 8, 1);
    let r = decision::solve(&p).unwrap();
    let brute = r.table.iter().map(|e| e.expected_utility).fold(f64::NEG_INFINITY, f64::max);
    c.check("solve attains the table maximum", r.e_u_star == brute, format!("{} vs {brute}", r.e_u_star));
    c.finish();
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
#[ignore = "acceptance"]
fn criterion_6_determinism() {
    let mut c = Criterion::new(6, "determinism");
    for mode in [Mode::Prior, Mode::Voi, Mode::Subsets, Mode::Sweep, Mode::Dynamic] {
        let mut cfg = RunConfig::default();
        cfg.analysis.mode = mode;
        cfg.analysis.n_samples = 20_000;
        cfg.analysis.n_inner = 5_000;
        cfg.analysis.n_outer = 64;
        cfg.analysis.sources = vec!["insp".into(), "shm".into()];
        cfg.analysis.epsilon = Some(4.0);
        let mut outputs = Vec::new();
        for threads in [1, 3, 4] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let record = pool.install(|| run(&cfg).unwrap());
            let dir = tempfile::tempdir().unwrap();
            write_outputs(&record, dir.path()).unwrap();
            outputs.push((threads, csv_files(dir.path()), record.tables, record.config_sha256));
        }
        let (_, files, tables, hash) = &outputs[0];
        let same = outputs[1..].iter().all(|(_, f, t, h)| f == files && t == tables && h == hash);
        c.check(
            &format!("{} outputs across 1, 3, 4 workers", mode.as_str()),
            same && !files.is_empty(),
            format!("{} csv files", files.len()),
        );
    }
    c.finish();
}
