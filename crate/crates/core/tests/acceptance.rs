//! Acceptance criteria 1–10. Every test prints one `PASS`/`FAIL` line with the
//! measured value and the pinned tolerance before asserting.
//!
//! Criterion 4 takes a few minutes in an optimized build. The full-size
//! criterion 5 takes much longer and is `#[ignore]`d; run it with
//! `cargo test -p missreg-core --release --test acceptance -- --ignored --nocapture`.

use std::time::Instant;

use missreg::design::{gram, IncompleteDesign};
use missreg::inference::{debias_with, upsilon_tilde, upsilon_tilde_naive};
use missreg::linalg::{norm_inf, norm_l1};
use missreg::simulation::{
    generate, random_coordinates, run_coverage, run_normality, run_rate_sweep, stream_rng, RunSettings,
    SyntheticModel, Tuning,
};
use missreg::theory::{
    check_likelihood_equivalence, kl_exact, kl_identity_covariance, kl_montecarlo, coupled_pair, Hypothesis,
};
use missreg::{dantzig, lp_oracle, solve_l1_linf, DantzigConfig, NoiseSpec, SolverConfig, SurrogateMoments};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn verdict(id: u32, what: &str, pass: bool, detail: String) {
    println!("criterion {id:>2} {} {what}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

fn settings() -> RunSettings {
    RunSettings::default()
}

// 1

const SOLVER_REL_TOL: f64 = 1e-6;
const SOLVER_FEAS_TOL: f64 = 1e-6;

#[test]
fn c01_solver_matches_lp_oracle() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cfg = SolverConfig::default();
    let (mut worst_rel, mut worst_viol, mut bad) = (0.0f64, f64::NEG_INFINITY, 0);
    for _ in 0..200 {
        let k = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let a = Array2::from_shape_simple_fn((k, m), || rng.sample::<f64, _>(StandardNormal));
        let x0 = Array1::from_shape_simple_fn(m, || if rng.random_bool(0.5) { rng.sample(StandardNormal) } else { 0.0 });
        let lambda = rng.random_range(0.05..1.0);
        let e = Array1::from_shape_simple_fn(k, || rng.random_range(-0.9..0.9) * lambda);
        let b = a.dot(&x0) + e;
        let rep = solve_l1_linf(a.view(), b.view(), lambda, &cfg).unwrap();
        let lp = norm_l1(lp_oracle(a.view(), b.view(), lambda).unwrap().view());
        let rel = (norm_l1(rep.solution.view()) - lp).abs() / lp.max(1.0);
        let viol = norm_inf((a.dot(&rep.solution) - &b).view()) - lambda;
        worst_rel = worst_rel.max(rel);
        worst_viol = worst_viol.max(viol);
        bad += (!rep.converged || rel > SOLVER_REL_TOL || viol > SOLVER_FEAS_TOL) as usize;
    }
    verdict(
        1,
        "ADMM vs LP oracle on 200 instances",
        bad == 0,
        format!(
            "worst relative objective gap {worst_rel:.2e} (tol {SOLVER_REL_TOL:.0e}), worst excess violation \
             {worst_viol:.2e} (tol {SOLVER_FEAS_TOL:.0e}), {bad} bad, {:.1?}",
            t0.elapsed()
        ),
    );
}

// 2

const UNBIASED_SE: f64 = 3.0;

#[test]
fn c02_surrogate_covariance_is_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (n, p) = (5, 3);
    let x = Array2::from_shape_simple_fn((n, p), || rng.sample::<f64, _>(StandardNormal));
    let rates = Array1::from(vec![0.6, 0.75, 0.9]);
    let mut target = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        for k in 0..p {
            target[[j, k]] = (0..n).map(|i| x[[i, j]] * x[[i, k]]).sum::<f64>() / n as f64;
        }
    }
    let draws = 100_000;
    let mut s1 = Array2::<f64>::zeros((p, p));
    let mut s2 = Array2::<f64>::zeros((p, p));
    for _ in 0..draws {
        let mask = Array2::from_shape_fn((n, p), |(_, j)| (rng.random::<f64>() < rates[j]) as u8);
        let d = IncompleteDesign::from_full(x.view(), mask, rates.clone()).unwrap();
        let s = d.surrogate_covariance();
        s1 += &s;
        s2 += &s.mapv(|v| v * v);
    }
    let dn = draws as f64;
    let mut worst = 0.0f64;
    for j in 0..p {
        for k in 0..p {
            let mean = s1[[j, k]] / dn;
            let se = ((s2[[j, k]] / dn - mean * mean) / dn).sqrt();
            worst = worst.max((mean - target[[j, k]]).abs() / se);
        }
    }
    verdict(
        2,
        "surrogate covariance unbiased over 1e5 masks",
        worst <= UNBIASED_SE,
        format!("max |mean − XᵀX/n| = {worst:.2} SE (tol {UNBIASED_SE} SE)"),
    );
}

// 3

const UPSILON_REL_TOL: f64 = 1e-12;

#[test]
fn c03_restructured_upsilon_matches_triple_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=5);
        let p = rng.random_range(1..=8);
        let x = Array2::from_shape_simple_fn((n, p), || rng.sample::<f64, _>(StandardNormal));
        let rates = Array1::from_shape_simple_fn(p, || rng.random_range(0.1..1.0));
        let beta = Array1::from_shape_simple_fn(p, || rng.sample::<f64, _>(StandardNormal));
        let fast = upsilon_tilde(x.view(), rates.view(), beta.view()).unwrap();
        let slow = upsilon_tilde_naive(x.view(), rates.view(), beta.view());
        // relative to the size of the summands, so exact cancellations to zero are fine
        let scale = (0..n)
            .map(|i| {
                let row = x.row(i);
                let total: f64 = (0..p).map(|t| (1.0 - rates[t]) * (row[t] * beta[t]).powi(2)).sum();
                row.iter().fold(0.0f64, |m, v| m.max(v * v)) * total
            })
            .sum::<f64>()
            .max(f64::MIN_POSITIVE)
            / n as f64;
        worst = worst.max((&fast - &slow).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale);
    }
    verdict(
        3,
        "restructured Υ̃ vs triple sum on 50 instances",
        worst <= UPSILON_REL_TOL,
        format!("worst relative difference {worst:.2e} (tol {UPSILON_REL_TOL:.0e})"),
    );
}

// 4

const COVERAGE_SUPPORT: (f64, f64) = (0.90, 0.98);
const COVERAGE_COMPLEMENT: (f64, f64) = (0.93, 0.99);
const LENGTH_TARGET: f64 = 0.208;
const LENGTH_REL_TOL: f64 = 0.35;

#[test]
fn c04_coverage_table_at_desk_scale() {
    let t0 = Instant::now();
    let model = SyntheticModel::banded(200, 10, 0.9, 0.1, 404).unwrap();
    let rep = run_coverage(&model, 1000, 200, 0.05, 404, &settings()).unwrap();
    let t = rep.table;
    let ok_in = (COVERAGE_SUPPORT.0..=COVERAGE_SUPPORT.1).contains(&t.avgcov_support);
    let ok_out = (COVERAGE_COMPLEMENT.0..=COVERAGE_COMPLEMENT.1).contains(&t.avgcov_complement);
    let ok_len = (t.avglen_support / LENGTH_TARGET - 1.0).abs() <= LENGTH_REL_TOL;
    verdict(
        4,
        "coverage at (n=1000, p=200, ρ=0.9), T=200",
        ok_in && ok_out && ok_len && rep.failures == 0,
        format!(
            "Avgcov(J0) {:.3} in {COVERAGE_SUPPORT:?}, Avgcov(J0c) {:.3} in {COVERAGE_COMPLEMENT:?}, Avglen(J0) {:.4} \
             within ±{:.0}% of {LENGTH_TARGET}, failures {}, {:.0?}",
            t.avgcov_support,
            t.avgcov_complement,
            t.avglen_support,
            100.0 * LENGTH_REL_TOL,
            rep.failures,
            t0.elapsed()
        ),
    );
}

// 5

const KS_MIN_P: f64 = 0.01;

fn normality(n: usize, p: usize, t: usize, seed: u64, label: &str) {
    let t0 = Instant::now();
    let model = SyntheticModel::banded(p, 10, 0.9, 0.1, seed).unwrap();
    let (i, o) = random_coordinates(&model, seed);
    let coords: Vec<usize> = i.into_iter().chain(o).collect();
    let rep = run_normality(&model, n, t, &coords, seed, &settings()).unwrap();
    let pv: Vec<f64> = rep.ks.iter().map(|k| k.p_value).collect();
    verdict(
        5,
        label,
        coords.len() == 2 && pv.iter().all(|&v| v > KS_MIN_P) && rep.failures == 0,
        format!(
            "KS p-values {pv:.3?} for coords {coords:?} (need > {KS_MIN_P}), failures {}, {:.0?}",
            rep.failures,
            t0.elapsed()
        ),
    );
}

#[test]
fn c05_normality_smoke() {
    normality(800, 100, 300, 505, "δ̂ normality, smoke (n=800, p=100), T=300");
}

#[test]
#[ignore = "desk-scale experiment: T = 300 at n = 1500, p = 500"]
fn c05_normality_desk_scale() {
    normality(1500, 500, 300, 505, "δ̂ normality (n=1500, p=500), T=300");
}

// 6

const SLOPE_KNOWN: f64 = 0.5;
const SLOPE_UNKNOWN: f64 = 1.0;
const SLOPE_TOL: f64 = 0.25;
/// λ constant of the sweep, fixed by a pilot on another seed. The unknown-Σ0
/// slope moves from about 3.7 to 0.5 as the constant goes from 0.2 to 1.0.
const SWEEP_LAMBDA_CONSTANT: f64 = 0.6;

#[test]
fn c06_rate_dichotomy() {
    let t0 = Instant::now();
    let model = SyntheticModel::banded(100, 5, 0.9, 0.1, 606).unwrap();
    let grid = [0.5, 0.6, 0.7, 0.8, 0.9];
    let sweep = RunSettings {
        tuning: Tuning { lambda_constant: SWEEP_LAMBDA_CONSTANT, ..Tuning::default() },
        ..settings()
    };
    let known = run_rate_sweep(&model, 4000, &grid, 50, 606, true, &sweep).unwrap();
    let unknown = run_rate_sweep(&model, 4000, &grid, 50, 606, false, &sweep).unwrap();
    let fails: usize = known.failures.iter().chain(&unknown.failures).sum();
    verdict(
        6,
        "log-log slope of median error vs 1/ρ",
        (known.slope - SLOPE_KNOWN).abs() <= SLOPE_TOL && (unknown.slope - SLOPE_UNKNOWN).abs() <= SLOPE_TOL && fails == 0,
        format!(
            "known Σ0 {:.3} (target {SLOPE_KNOWN} ± {SLOPE_TOL}), unknown {:.3} (target {SLOPE_UNKNOWN} ± {SLOPE_TOL}); \
             medians known {:.4?}, unknown {:.4?}; failures {fails}, {:.0?}",
            known.slope,
            unknown.slope,
            known.median_error,
            unknown.median_error,
            t0.elapsed()
        ),
    );
}

// 7

const EQUIV_SE: f64 = 3.0;

#[test]
fn c07_likelihood_equivalence() {
    let pair = coupled_pair(8, 4, 1.0, 0.1, 7, 1.0, 0.5).unwrap();
    let rep = check_likelihood_equivalence(&pair, 2, 7, 10_000, 707).unwrap();
    let z = (rep.both_observed_fraction - 0.25).abs() / rep.binomial_se;
    verdict(
        7,
        "likelihoods agree unless both coupled coordinates are observed",
        rep.violations == 0 && rep.tolerance <= 1e-9 && z <= EQUIV_SE,
        format!(
            "violations {} above {:.0e}, max discrepancy {:.2e}, both-observed fraction {:.4} ({z:.2} SE from 0.25, tol {EQUIV_SE})",
            rep.violations, rep.tolerance, rep.max_discrepancy, rep.both_observed_fraction
        ),
    );
}

// 8

const KL_SLOPE: f64 = 2.0;
const KL_SLOPE_TOL: f64 = 0.1;

#[test]
fn c08_kl_scales_as_rho_squared() {
    let rhos = [0.1, 0.2, 0.3, 0.4, 0.5];
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for &r in &rhos {
        let (h0, h1) = coupled_pair(10, 4, 1.0, 0.1, 9, 1.0, r).unwrap();
        lx.push(f64::ln(r));
        ly.push(kl_exact(&h0, &h1).unwrap().ln());
    }
    let slope = missreg::simulation::ls_slope(&lx, &ly);
    verdict(
        8,
        "exact KL of the coupled pair vs ρ (p=10)",
        (slope - KL_SLOPE).abs() <= KL_SLOPE_TOL,
        format!("log-log slope {slope:.4} (target {KL_SLOPE} ± {KL_SLOPE_TOL})"),
    );
}

// 9

const KL_MC_SE: f64 = 3.0;

#[test]
fn c09_identity_kl_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst = 0.0f64;
    for t in 0..10 {
        let b0 = Array1::from_shape_simple_fn(4, || rng.sample::<f64, _>(StandardNormal));
        let b1 = Array1::from_shape_simple_fn(4, || rng.sample::<f64, _>(StandardNormal));
        let rho = rng.random_range(0.2..0.9);
        let exact = kl_identity_covariance(b0.view(), b1.view(), 0.5, rho).unwrap();
        let h0 = Hypothesis::identity(b0, 0.5, rho).unwrap();
        let h1 = Hypothesis::identity(b1, 0.5, rho).unwrap();
        let mc = kl_montecarlo(&h0, &h1, 50_000, 9090 + t).unwrap();
        worst = worst.max((mc.estimate - exact).abs() / mc.stderr);
    }
    verdict(
        9,
        "identity-covariance KL vs Monte-Carlo on 10 pairs",
        worst <= KL_MC_SE,
        format!("worst |MC − exact| = {worst:.2} SE (tol {KL_MC_SE} SE)"),
    );
}

// 10

const REDUCTION_TOL: f64 = 1e-12;

#[test]
fn c10_fully_observed_reductions() {
    let model = SyntheticModel::banded(30, 4, 1.0, 0.2, 1010).unwrap();
    let s = generate(&model, 200, &mut stream_rng(1010, 1)).unwrap();
    let (n, p) = s.x_full.dim();
    let moments = SurrogateMoments::from_design(&s.design, s.y.view()).unwrap();

    // (a) the surrogate covariance is the row-ordered sample second moment
    let mut sample_cov = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        for k in 0..=j {
            let mut acc = 0.0;
            for i in 0..n {
                acc += s.x_full[[i, j]] * s.x_full[[i, k]];
            }
            sample_cov[[j, k]] = acc / n as f64;
            sample_cov[[k, j]] = acc / n as f64;
        }
    }
    let bitwise = moments.sigma == sample_cov && moments.sigma == gram(s.x_full.view());

    // (b) the correction is Θ Xᵀ(y − Xβ)/n
    let beta = Array1::from_shape_fn(p, |j| 0.1 * j as f64 - 1.0);
    let theta = Array2::from_shape_fn((p, p), |(i, j)| if i == j { 1.0 } else { 0.01 * (i + 2 * j) as f64 });
    let got = debias_with(beta.view(), theta.view(), &moments).unwrap();
    let resid = &s.y - &s.x_full.dot(&beta);
    let classical = &beta + &theta.dot(&s.x_full.t().dot(&resid)) / n as f64;
    let debias_err = norm_inf((&got - &classical).view()) / norm_inf(classical.view());

    // (c) known covariance equal to the surrogate gives the same fit
    let known = SurrogateMoments::with_population(&s.design, s.y.view(), moments.sigma.view()).unwrap();
    let cfg = DantzigConfig::fixed(0.05);
    let noise = NoiseSpec::new(0.2, model.sigma_x()).unwrap();
    let a = dantzig::fit(&moments, noise, &cfg).unwrap();
    let b = dantzig::fit(&known, noise, &cfg).unwrap();
    let fit_diff = norm_inf((&a.beta - &b.beta).view());
    let _ = IncompleteDesign::fully_observed(s.x_full.view()).unwrap();

    verdict(
        10,
        "ρ = 1 reductions",
        bitwise && debias_err <= REDUCTION_TOL && fit_diff <= cfg.solver.tol_primal,
        format!(
            "(a) Σ̃ bitwise equal: {bitwise}; (b) de-bias vs classical residual {debias_err:.2e} (tol {REDUCTION_TOL:.0e}); \
             (c) known vs unknown fit {fit_diff:.2e} (tol {:.0e})",
            cfg.solver.tol_primal
        ),
    );
}
