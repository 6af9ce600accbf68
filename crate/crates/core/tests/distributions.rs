use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riskvoi::distributions::special::{norm_cdf, norm_inv_cdf};
use riskvoi::distributions::{lhs_sample, CopulaSpec, MarginalSpec};

fn open01(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand::distr::Open01)
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
fn lognormal_moments_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (m, sd) in [(6.0, 3.0), (10.0, 3.0), (400.0, 20.0)] {
        let spec = MarginalSpec::lognormal(m, sd).unwrap();
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| spec.quantile(open01(&mut rng)).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert_relative_eq!(mean, m, max_relative = 0.01);
        assert_relative_eq!(var.sqrt(), sd, max_relative = 0.01);
    }
}

#[test]
fn copula_spearman_matches_closed_form() {
    let rho = 2.0 / 3.0;
    let c = CopulaSpec::bivariate(
        MarginalSpec::gamma(2.0, 0.5).unwrap(),
        MarginalSpec::lognormal(400.0, 10.0).unwrap(),
        rho,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let (mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let x = c.sample(&[open01(&mut rng), open01(&mut rng)]).unwrap();
        a.push(x[0]);
        b.push(x[1]);
    }
    let spearman = pearson(&ranks(&a), &ranks(&b));
    // 6/π·asin(ρ/2)
    assert!((spearman - 0.649_040_687_8).abs() < 0.02, "spearman {spearman}");
    let scf_mean = a.iter().sum::<f64>() / n as f64;
    assert!((scf_mean - 1.0).abs() < 0.05, "SCF mean {scf_mean}");
}

#[test]
fn copula_marginals_pass_ks() {
    let c = CopulaSpec::bivariate(
        MarginalSpec::gamma(2.0, 0.5).unwrap(),
        MarginalSpec::lognormal(400.0, 10.0).unwrap(),
        2.0 / 3.0,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 20_000;
    let draws: Vec<Vec<f64>> = (0..n).map(|_| c.sample(&[open01(&mut rng), open01(&mut rng)]).unwrap()).collect();
    for k in 0..2 {
        let mut u: Vec<f64> = draws.iter().map(|d| c.marginals()[k].cdf(d[k])).collect();
        u.sort_by(f64::total_cmp);
        let d = u
            .iter()
            .enumerate()
            .map(|(i, &v)| (v - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - v).abs()))
            .fold(0.0, f64::max);
        // 1% critical value of the one-sample KS statistic
        assert!(d < 1.63 / (n as f64).sqrt(), "marginal {k}: D = {d}");
    }
}

#[test]
fn conditional_latent_mean_at_ninetieth_percentile() {
    let c = CopulaSpec::bivariate(
        MarginalSpec::gamma(2.0, 0.5).unwrap(),
        MarginalSpec::lognormal(400.0, 10.0).unwrap(),
        2.0 / 3.0,
    )
    .unwrap();
    let scf90 = c.marginals()[0].quantile(0.9).unwrap();
    let n = 20_000;
    let mean_latent = (0..n)
        .map(|i| {
            let u = (i as f64 + 0.5) / n as f64;
            let y = c.conditional_sample(0, scf90, u).unwrap();
            c.marginals()[1].latent(y).unwrap()
        })
        .sum::<f64>()
        / n as f64;
    assert!((mean_latent - 0.854_367_710_4).abs() < 0.01, "latent mean {mean_latent}");
    assert_relative_eq!(norm_cdf(norm_inv_cdf(0.9)), 0.9, max_relative = 1e-14);
}

#[test]
fn latin_hypercube_is_stratified_for_many_shapes() {
    for (n, d) in [(1, 1), (7, 3), (100, 10), (1000, 13), (4096, 2)] {
        let m = lhs_sample(n, d, n as u64 * 31 + d as u64).unwrap();
        for j in 0..d {
            let mut hit = vec![false; n];
            for v in m.column(j) {
                let k = ((v * n as f64) as usize).min(n - 1);
                assert!(!hit[k]);
                hit[k] = true;
            }
        }
    }
}
