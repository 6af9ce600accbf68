use riskvoi::structural::{draw_parameter_samples, LatentNoise};
use riskvoi::voi::{
    combination_standard_error, condition_imperfect, isotonic_non_increasing, voi, voi_all_subsets, voi_sensitivity,
};
use riskvoi::{CostModel, DataSource, DecisionProblem, LoadingConfig, MeasurementPlan, Priors, SnModel, SourceKind};

fn problem(n: usize, seed: u64) -> DecisionProblem<f64> {
    DecisionProblem::from_priors(Priors::bridge(), n, seed, CostModel::default(), SnModel::class_d(), LoadingConfig::new(1.58e5, 1).unwrap())
        .unwrap()
}

#[test]
fn conjugate_normal_update() {
    // pin σ_L to its mean so the measurement informs μ ~ N(50, 5) directly
    let mut samples = draw_parameter_samples::<f64>(&Priors::bridge(), 40_000, 12).unwrap();
    for s in &mut samples {
        s.sd_sigma_l = 1e-9;
        s.sigma_l = s.mu_sigma_l;
        s.noise = LatentNoise { load: 0.0, ..s.noise };
    }
    let src = DataSource::gaussian(SourceKind::Shm, 5.0).unwrap();
    let post = condition_imperfect(&samples, src, 60.0, 2.0 / 3.0).unwrap();
    let mean = post.mean(|s| s.mu_sigma_l);
    let sd_post = 12.5_f64.sqrt();
    assert!((mean - 55.0).abs() <= 3.0 * sd_post / post.ess.sqrt(), "posterior mean {mean}, ESS {}", post.ess);
    let var = post.mean(|s| (s.mu_sigma_l - mean).powi(2));
    assert!((var - 12.5).abs() < 1.0, "posterior variance {var}");
}

#[test]
fn uninformative_measurement_has_no_value() {
    let p = problem(4000, 3);
    let plan = MeasurementPlan::new(vec![DataSource::gaussian(SourceKind::Shm, 1e6).unwrap()]).unwrap();
    let r = voi(&plan, &p, 40, 5).unwrap();
    assert!(r.voi.abs() < 1e-6, "voi {}", r.voi);
    assert!(r.draws.iter().all(|d| d.action == r.prior_action));
}

#[test]
fn subsets_are_nonnegative_and_dominated_by_supersets() {
    let p = problem(4000, 4);
    let all = voi_all_subsets(&p, 60, 9).unwrap();
    assert_eq!(all.len(), 8);
    assert_eq!(all[0].voi, 0.0);
    for r in &all {
        assert!(r.voi >= -4.0 * r.mc_standard_error, "{}: {} ± {}", r.plan, r.voi, r.mc_standard_error);
    }
    for a in 0..8usize {
        for b in 0..8usize {
            if a & b == a && a != b {
                let se = combination_standard_error(&[(1.0, &all[b]), (-1.0, &all[a])]).unwrap();
                assert!(all[b].voi >= all[a].voi - 4.0 * se, "{} vs {}", all[b].plan, all[a].plan);
            }
        }
    }
}

#[test]
fn imperfect_never_beats_perfect() {
    let p = problem(4000, 6);
    let perfect = voi(&MeasurementPlan::perfect(&[SourceKind::Inspection]).unwrap(), &p, 60, 2).unwrap();
    for r in voi_sensitivity(SourceKind::Inspection, &[0.05, 0.5, 5.0], &p, 60, 2).unwrap() {
        let se = combination_standard_error(&[(1.0, &perfect), (-1.0, &r.result)]).unwrap();
        assert!(r.result.voi <= perfect.voi + 4.0 * se.max(r.result.mc_standard_error));
    }
}

#[test]
fn sweep_is_monotone_within_noise() {
    let p = problem(4000, 7);
    let eps = [0.5, 2.0, 10.0, 50.0];
    let pts = voi_sensitivity(SourceKind::Inspection, &eps, &p, 80, 3).unwrap();
    let v: Vec<f64> = pts.iter().map(|x| x.result.voi).collect();
    let w: Vec<f64> = pts.iter().map(|x| 1.0 / x.result.mc_standard_error.max(1e-6).powi(2)).collect();
    let iso = isotonic_non_increasing(&v, &w);
    for (k, x) in pts.iter().enumerate() {
        assert!((v[k] - iso[k]).abs() <= 2.0 * x.result.mc_standard_error.max(1e-9));
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let p = problem(9000, 10);
            let plan = MeasurementPlan::new(vec![
                DataSource::perfect(SourceKind::Inspection),
                DataSource::gaussian(SourceKind::Shm, 4.0).unwrap(),
            ])
            .unwrap();
            voi(&plan, &p, 24, 77).unwrap()
        })
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a, b);
}
