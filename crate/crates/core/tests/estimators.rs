use missreg::design::IncompleteDesign;
use missreg::inference::upsilon_tilde;
use missreg::linalg::norm_l1;
use missreg::simulation::{run_coverage, RunSettings, SyntheticModel, Tuning};
use missreg::{dantzig, fit_clime_columns, lp_oracle, ClimeConfig, DantzigConfig, NoiseSpec, SurrogateMoments};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, p), || rng.sample(StandardNormal))
}

fn masked(rng: &mut ChaCha8Rng, x: &Array2<f64>, rates: &Array1<f64>) -> IncompleteDesign {
    let mask = Array2::from_shape_fn(x.dim(), |(_, j)| (rng.random::<f64>() < rates[j]) as u8);
    IncompleteDesign::from_full(x.view(), mask, rates.clone()).unwrap()
}

#[test]
fn surrogate_moments_are_unbiased_over_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (n, p) = (6, 3);
    let x = gaussian(&mut rng, n, p);
    let y: Array1<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let rates = Array1::from(vec![0.5, 0.7, 0.9]);
    // full-data targets, computed directly
    let mut target = Array2::<f64>::zeros((p, p));
    let mut target_c = Array1::<f64>::zeros(p);
    for i in 0..n {
        for j in 0..p {
            target_c[j] += x[[i, j]] * y[i] / n as f64;
            for k in 0..p {
                target[[j, k]] += x[[i, j]] * x[[i, k]] / n as f64;
            }
        }
    }
    let draws = 40_000;
    let (mut s1, mut s2) = (Array2::<f64>::zeros((p, p)), Array2::<f64>::zeros((p, p)));
    let (mut c1, mut c2) = (Array1::<f64>::zeros(p), Array1::<f64>::zeros(p));
    for _ in 0..draws {
        let m = SurrogateMoments::from_design(&masked(&mut rng, &x, &rates), y.view()).unwrap();
        s1 += &m.sigma;
        s2 += &m.sigma.mapv(|v| v * v);
        c1 += &m.cross;
        c2 += &m.cross.mapv(|v| v * v);
    }
    let d = draws as f64;
    for j in 0..p {
        for k in 0..p {
            let mean = s1[[j, k]] / d;
            let se = ((s2[[j, k]] / d - mean * mean) / d).sqrt();
            assert!((mean - target[[j, k]]).abs() <= 5.0 * se + 1e-12, "sigma[{j},{k}]: {mean} vs {}", target[[j, k]]);
        }
        let mean = c1[j] / d;
        let se = ((c2[j] / d - mean * mean) / d).sqrt();
        assert!((mean - target_c[j]).abs() <= 5.0 * se + 1e-12, "cross[{j}]");
    }
}

/// `Υ̃` straight from its definition: per row, the product of two coordinates
/// times the weighted squared signal of the remaining ones.
fn upsilon_reference(x: &Array2<f64>, rates: &Array1<f64>, beta: &Array1<f64>) -> Array2<f64> {
    let (n, p) = x.dim();
    let mut u = Array2::<f64>::zeros((p, p));
    for i in 0..n {
        let terms: Vec<f64> = (0..p).map(|t| (1.0 - rates[t]) * (x[[i, t]] * beta[t]).powi(2)).collect();
        let total: f64 = terms.iter().sum();
        for j in 0..p {
            for k in 0..p {
                let rest = if j == k { total - terms[j] } else { total - terms[j] - terms[k] };
                u[[j, k]] += x[[i, j]] * x[[i, k]] * rest / n as f64;
            }
        }
    }
    u
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn upsilon_matches_definition(seed in 0u64..100_000, n in 1usize..12, p in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gaussian(&mut rng, n, p);
        let rates: Array1<f64> = (0..p).map(|_| rng.random_range(0.2..1.0)).collect();
        let beta: Array1<f64> = (0..p).map(|_| if rng.random_bool(0.4) { 0.0 } else { rng.sample(StandardNormal) }).collect();
        let fast = upsilon_tilde(x.view(), rates.view(), beta.view()).unwrap();
        let slow = upsilon_reference(&x, &rates, &beta);
        let scale = 1.0 + slow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in fast.iter().zip(slow.iter()) {
            prop_assert!((a - b).abs() <= 1e-10 * scale, "{} vs {}", a, b);
        }
    }
}

fn moments(seed: u64, n: usize, p: usize) -> SurrogateMoments {
    let model = SyntheticModel::banded(p, 3, 0.8, 0.2, seed).unwrap();
    let mut rng = missreg::simulation::stream_rng(seed, 1);
    let s = missreg::simulation::generate(&model, n, &mut rng).unwrap();
    SurrogateMoments::from_design(&s.design, s.y.view()).unwrap()
}

#[test]
fn dantzig_objective_matches_linear_program() {
    for seed in 0..4 {
        let m = moments(seed, 80, 12);
        let lambda = 0.15;
        let fit = dantzig::fit(&m, NoiseSpec::new(0.2, 1.0).unwrap(), &DantzigConfig::fixed(lambda)).unwrap();
        let lp = lp_oracle(m.sigma.view(), m.cross.view(), lambda).unwrap();
        let (a, b) = (norm_l1(fit.beta.view()), norm_l1(lp.view()));
        assert!((a - b).abs() <= 1e-5 * (1.0 + b), "seed {seed}: admm {a}, lp {b}");
        let viol = (m.sigma.dot(&fit.beta) - &m.cross).iter().fold(0.0f64, |x, v| x.max(v.abs()));
        assert!(viol <= lambda * (1.0 + 1e-6));
    }
}

#[test]
fn clime_columns_match_linear_program() {
    let m = moments(9, 120, 12);
    let nu = 0.3;
    let cols = [0, 5, 11];
    let cfg = ClimeConfig { symmetrize: false, ..ClimeConfig::fixed(nu) };
    let fit = fit_clime_columns(m.sigma.view(), &cfg, None, &cols).unwrap();
    for &j in &cols {
        let mut e = Array1::<f64>::zeros(12);
        e[j] = 1.0;
        let lp = lp_oracle(m.sigma.view(), e.view(), nu).unwrap();
        let (a, b) = (norm_l1(fit.raw.column(j)), norm_l1(lp.view()));
        assert!((a - b).abs() <= 1e-5 * (1.0 + b), "column {j}: admm {a}, lp {b}");
    }
}

#[test]
fn coverage_run_is_identical_across_worker_counts() {
    let model = SyntheticModel::banded(15, 3, 0.9, 0.1, 3).unwrap();
    let tuning = Tuning { tol: 1e-5, ..Tuning::default() };
    let run = |w| {
        let settings = RunSettings { tuning, redraw_beta: false, workers: Some(w) };
        run_coverage(&model, 100, 4, 0.05, 3, &settings).unwrap()
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.avgcov, b.avgcov);
    assert_eq!(a.avglen, b.avglen);
    assert_eq!(a.failures, b.failures);
    assert_eq!(a.random_in, b.random_in);
}
