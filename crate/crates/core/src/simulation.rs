//! Synthetic experiments: banded-precision Gaussian designs with MCAR
//! masks, coverage/length tables, normality diagnostics and rate sweeps.
//!
//! Every replication draws from its own ChaCha stream (`stream = rep + 1`
//! under the master seed; stream 0 draws the coefficients), and results are
//! slotted by replication index, so reports do not depend on the worker
//! count.

use ndarray::{Array1, Array2};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clime::{ClimeConfig, Nu};
use crate::dantzig::{self, DantzigConfig, Lambda};
use crate::design::{IncompleteDesign, NoiseSpec, SurrogateMoments};
use crate::error::{Error, Result};
use crate::inference::{infer_from_beta, oracle_sandwich_diag, variance_oracle, InferenceOptions};
use crate::linalg::{self, Cholesky};
use crate::solver::SolverConfig;
use crate::stats::{ks_normal, KsResult, KS_MIN_SAMPLES};

/// `Ω_ij = base^|i−j|` for `|i − j| ≤ width`, zero otherwise.
pub fn banded_precision(p: usize, base: f64, width: usize) -> Array2<f64> {
    Array2::from_shape_fn((p, p), |(i, j)| {
        let d = i.abs_diff(j);
        if d <= width {
            base.powi(d as i32)
        } else {
            0.0
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SyntheticModel {
    pub p: usize,
    pub s: usize,
    pub omega_base: f64,
    pub omega_width: usize,
    /// `Ω`, the precision matrix.
    pub omega: Array2<f64>,
    /// `Σ₀ = Ω⁻¹`.
    pub sigma0: Array2<f64>,
    #[serde(skip)]
    factor: Array2<f64>,
    pub beta_star: Array1<f64>,
    /// `J₀`, sorted.
    pub support: Vec<usize>,
    pub sigma_eps: f64,
    pub rates: Array1<f64>,
}

impl SyntheticModel {
    /// The banded design (`base 0.5`, `width 5`) with `s` coefficients of
    /// random sign on a uniformly random support, drawn from `seed`.
    pub fn banded(p: usize, s: usize, rho: f64, sigma_eps: f64, seed: u64) -> Result<Self> {
        if p == 0 || s > p {
            return Err(Error::InvalidInput(format!("need 0 < p and s <= p, got p={p}, s={s}")));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidInput(format!("rho must lie in (0, 1], got {rho}")));
        }
        if !(sigma_eps >= 0.0 && sigma_eps.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma_eps must be nonnegative, got {sigma_eps}")));
        }
        let omega = banded_precision(p, 0.5, 5);
        let sigma0 = Cholesky::new(omega.view())?.inverse();
        let factor = Cholesky::new(sigma0.view())?.lower().clone();
        let mut rng = stream_rng(seed, 0);
        let (beta_star, support) = draw_beta(p, s, &mut rng);
        Ok(SyntheticModel {
            p,
            s,
            omega_base: 0.5,
            omega_width: 5,
            omega,
            sigma0,
            factor,
            beta_star,
            support,
            sigma_eps,
            rates: Array1::from_elem(p, rho),
        })
    }

    /// Same model with uniform rate `rho`.
    pub fn with_rate(&self, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidInput(format!("rho must lie in (0, 1], got {rho}")));
        }
        let mut m = self.clone();
        m.rates = Array1::from_elem(self.p, rho);
        Ok(m)
    }

    pub fn with_beta(&self, beta_star: Array1<f64>) -> Result<Self> {
        if beta_star.len() != self.p {
            return Err(Error::DimensionMismatch {
                what: "coefficient length",
                expected: self.p,
                got: beta_star.len(),
            });
        }
        let mut m = self.clone();
        m.support = (0..self.p).filter(|&j| beta_star[j] != 0.0).collect();
        m.s = m.support.len();
        m.beta_star = beta_star;
        Ok(m)
    }

    /// `σ_x` used for tuning: `√max_j Σ₀,jj`.
    pub fn sigma_x(&self) -> f64 {
        self.sigma0.diag().fold(0.0f64, |m, v| m.max(*v)).sqrt()
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            sigma_eps: self.sigma_eps,
            sigma_x: self.sigma_x(),
        }
    }

    pub fn rho_star(&self) -> f64 {
        self.rates.fold(f64::INFINITY, |m, v| m.min(*v))
    }
}

fn draw_beta(p: usize, s: usize, rng: &mut ChaCha8Rng) -> (Array1<f64>, Vec<usize>) {
    let mut support = sample_indices(rng, p, s).into_vec();
    support.sort_unstable();
    let mut beta = Array1::<f64>::zeros(p);
    for &j in &support {
        beta[j] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    (beta, support)
}

/// ChaCha8 stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub design: IncompleteDesign,
    pub y: Array1<f64>,
    pub x_full: Array2<f64>,
}

/// Rows of `X` i.i.d. `N(0, Σ₀)`, `y = Xβ* + ε`, mask entries i.i.d.
/// Bernoulli(`ρ_j`).
pub fn generate<R: Rng>(model: &SyntheticModel, n: usize, rng: &mut R) -> Result<Sample> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    let p = model.p;
    let z = Array2::<f64>::from_shape_simple_fn((n, p), || rng.sample(StandardNormal));
    let x = z.dot(&model.factor.t());
    let eps: Array1<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * model.sigma_eps).collect();
    let y = x.dot(&model.beta_star) + eps;
    let mut mask = Array2::<u8>::zeros((n, p));
    for i in 0..n {
        for j in 0..p {
            let r = model.rates[j];
            mask[[i, j]] = (r >= 1.0 || rng.random::<f64>() < r) as u8;
        }
    }
    let design = IncompleteDesign::from_full(x.view(), mask, model.rates.clone())?;
    Ok(Sample { design, y, x_full: x })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tuning {
    /// Constant in the automatic λ.
    pub lambda_constant: f64,
    /// Constant in the automatic ν.
    pub nu_constant: f64,
    pub b1: f64,
    pub symmetrize: bool,
    /// Use `‖β*‖₂` in the λ formula instead of the two-stage plug-in.
    pub oracle_beta_norm: bool,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for Tuning {
    fn default() -> Self {
        // calibrated by a coverage pilot at (n=1000, p=200, ρ=0.9)
        Tuning {
            lambda_constant: 0.2,
            nu_constant: 0.2,
            b1: 2.0,
            symmetrize: false,
            oracle_beta_norm: false,
            tol: 1e-4,
            max_iters: 20_000,
        }
    }
}

impl Tuning {
    fn solver(&self) -> SolverConfig {
        SolverConfig {
            tol_primal: self.tol,
            tol_dual: self.tol,
            max_iters: self.max_iters,
            ..SolverConfig::default()
        }
    }

    pub fn dantzig(&self, beta_norm: Option<f64>) -> DantzigConfig {
        DantzigConfig {
            lambda: Lambda::Auto,
            auto_constant: self.lambda_constant,
            beta_norm_guess: beta_norm,
            solver: self.solver(),
        }
    }

    pub fn clime(&self) -> ClimeConfig {
        ClimeConfig {
            nu: Nu::Auto,
            auto_constant: self.nu_constant,
            b1_guess: self.b1,
            symmetrize: self.symmetrize,
            solver: self.solver(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub tuning: Tuning,
    /// Draw a fresh support and signs in every replication.
    pub redraw_beta: bool,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            tuning: Tuning::default(),
            redraw_beta: false,
            workers: None,
        }
    }
}

fn run_parallel<T: Send>(workers: Option<usize>, t: usize, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
    let job = || (0..t).into_par_iter().map(&f).collect::<Vec<T>>();
    match workers {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(job))
        }
        None => Ok(job()),
    }
}

/// Model for replication `rep`: the fixed one, or a redrawn support.
fn rep_model(model: &SyntheticModel, settings: &RunSettings, rng: &mut ChaCha8Rng) -> Result<SyntheticModel> {
    if settings.redraw_beta {
        let (b, _) = draw_beta(model.p, model.s, rng);
        model.with_beta(b)
    } else {
        Ok(model.clone())
    }
}

struct RepOutcome {
    support: Vec<usize>,
    beta_star: Array1<f64>,
    centers: Array1<f64>,
    var: Vec<f64>,
    half: Vec<f64>,
    covered: Vec<bool>,
}

fn one_replication(model: &SyntheticModel, n: usize, alpha: f64, coords: &[usize], seed: u64, rep: usize, settings: &RunSettings) -> Result<RepOutcome> {
    let mut rng = stream_rng(seed, rep as u64 + 1);
    let m = rep_model(model, settings, &mut rng)?;
    let sample = generate(&m, n, &mut rng)?;
    let noise = m.noise();
    let moments = SurrogateMoments::from_design(&sample.design, sample.y.view())?;
    let beta_norm = settings.tuning.oracle_beta_norm.then(|| linalg::norm_l2(m.beta_star.view()));
    let fit = dantzig::fit(&moments, noise, &settings.tuning.dantzig(beta_norm))?;
    let res = infer_from_beta(
        &sample.design,
        sample.y.view(),
        &moments,
        fit.beta.view(),
        noise,
        &settings.tuning.clime(),
        coords,
        &InferenceOptions { alpha, plugin_sigma_eps: false },
    )?;
    let centers = res.beta_debiased.clone();
    let mut half = Vec::with_capacity(res.coords.len());
    let mut covered = Vec::with_capacity(res.coords.len());
    for (k, &j) in res.coords.iter().enumerate() {
        let (lo, hi) = res.intervals[k];
        half.push(0.5 * (hi - lo));
        covered.push(lo <= m.beta_star[j] && m.beta_star[j] <= hi);
    }
    Ok(RepOutcome {
        support: m.support.clone(),
        beta_star: m.beta_star.clone(),
        centers,
        var: res.var_diag,
        half,
        covered,
    })
}

/// One row of the coverage table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    pub avgcov_random_in: f64,
    pub avglen_random_in: f64,
    pub avgcov_random_out: f64,
    pub avglen_random_out: f64,
    pub avgcov_support: f64,
    pub avglen_support: f64,
    pub avgcov_complement: f64,
    pub avglen_complement: f64,
}

impl TableRow {
    pub const CSV_HEADER: &'static str = "n,p,rho,avgcov_random_in,avglen_random_in,avgcov_random_out,avglen_random_out,avgcov_J0,avglen_J0,avgcov_J0c,avglen_J0c";

    pub fn csv_line(&self, n: usize, p: usize, rho: f64) -> String {
        format!(
            "{n},{p},{rho},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            self.avgcov_random_in,
            self.avglen_random_in,
            self.avgcov_random_out,
            self.avglen_random_out,
            self.avgcov_support,
            self.avglen_support,
            self.avgcov_complement,
            self.avglen_complement
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub rho: f64,
    pub alpha: f64,
    pub replications: usize,
    pub successes: usize,
    pub failures: usize,
    /// First few failure messages, by replication index.
    pub failure_messages: Vec<(usize, String)>,
    pub seed: u64,
    pub support: Vec<usize>,
    pub redraw_beta: bool,
    /// `Avgcov(j)` for every coordinate.
    pub avgcov: Vec<f64>,
    /// `Avglen(j)` for every coordinate.
    pub avglen: Vec<f64>,
    pub random_in: Option<usize>,
    pub random_out: Option<usize>,
    pub table: TableRow,
    pub settings: RunSettings,
}

fn mean_over(v: &[f64], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return f64::NAN;
    }
    idx.iter().map(|&j| v[j]).sum::<f64>() / idx.len() as f64
}

const MAX_FAILURE_MESSAGES: usize = 20;

/// The full-scale `(n, p, ρ)` grid of the coverage tables.
pub const FULL_GRID: [(usize, usize, f64); 20] = [
    (1000, 200, 0.9),
    (1000, 200, 0.8),
    (1000, 200, 0.7),
    (1500, 500, 0.9),
    (1500, 500, 0.8),
    (1500, 500, 0.7),
    (2000, 1000, 0.9),
    (2000, 1000, 0.8),
    (2000, 1000, 0.7),
    (3000, 2000, 0.9),
    (3000, 2000, 0.8),
    (3000, 2000, 0.7),
    (1000, 200, 0.5),
    (2000, 200, 0.5),
    (3000, 200, 0.5),
    (4000, 200, 0.5),
    (1500, 500, 0.5),
    (3000, 500, 0.5),
    (8000, 500, 0.5),
    (12000, 500, 0.5),
];

/// One coordinate drawn uniformly from the support and one from its
/// complement, from a stream reserved for this purpose.
pub fn random_coordinates(model: &SyntheticModel, seed: u64) -> (Option<usize>, Option<usize>) {
    let support = &model.support;
    let complement: Vec<usize> = (0..model.p).filter(|j| support.binary_search(j).is_err()).collect();
    let mut pick = stream_rng(seed, u64::MAX);
    let random_in = (!support.is_empty()).then(|| support[pick.random_range(0..support.len())]);
    let random_out = (!complement.is_empty()).then(|| complement[pick.random_range(0..complement.len())]);
    (random_in, random_out)
}

/// `T` replications of generate → infer; per-coordinate coverage and
/// interval length, aggregated over `J₀`, `J₀ᶜ` and one random member of
/// each.
pub fn run_coverage(model: &SyntheticModel, n: usize, t: usize, alpha: f64, seed: u64, settings: &RunSettings) -> Result<ExperimentReport> {
    if t == 0 {
        return Err(Error::InvalidInput("need at least one replication".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let p = model.p;
    let all: Vec<usize> = (0..p).collect();
    let outcomes = run_parallel(settings.workers, t, |rep| one_replication(model, n, alpha, &all, seed, rep, settings))?;

    let mut cov_sum = vec![0.0; p];
    let mut len_sum = vec![0.0; p];
    let mut ok = 0usize;
    let mut failure_messages = Vec::new();
    // per-replication support means, used when the support is redrawn
    let mut rep_means: Vec<[f64; 4]> = Vec::new();
    for (rep, o) in outcomes.iter().enumerate() {
        match o {
            Ok(o) => {
                ok += 1;
                for j in 0..p {
                    cov_sum[j] += o.covered[j] as u8 as f64;
                    len_sum[j] += 2.0 * o.half[j];
                }
                let cov: Vec<f64> = o.covered.iter().map(|c| *c as u8 as f64).collect();
                let len: Vec<f64> = o.half.iter().map(|h| 2.0 * h).collect();
                let comp: Vec<usize> = (0..p).filter(|j| o.support.binary_search(j).is_err()).collect();
                rep_means.push([
                    mean_over(&cov, &o.support),
                    mean_over(&len, &o.support),
                    mean_over(&cov, &comp),
                    mean_over(&len, &comp),
                ]);
            }
            Err(e) => {
                if failure_messages.len() < MAX_FAILURE_MESSAGES {
                    failure_messages.push((rep, e.to_string()));
                }
            }
        }
    }
    let denom = ok.max(1) as f64;
    let (avgcov, avglen): (Vec<f64>, Vec<f64>) = if ok == 0 {
        (vec![f64::NAN; p], vec![f64::NAN; p])
    } else {
        (cov_sum.iter().map(|v| v / denom).collect(), len_sum.iter().map(|v| v / denom).collect())
    };

    let support = model.support.clone();
    let complement: Vec<usize> = (0..p).filter(|j| support.binary_search(j).is_err()).collect();
    let (random_in, random_out) = random_coordinates(model, seed);
    let at = |v: &[f64], j: Option<usize>| j.map_or(f64::NAN, |j| v[j]);
    let (cs, ls, cc, lc) = if settings.redraw_beta {
        let m = |k: usize| rep_means.iter().map(|r| r[k]).sum::<f64>() / rep_means.len().max(1) as f64;
        (m(0), m(1), m(2), m(3))
    } else {
        (
            mean_over(&avgcov, &support),
            mean_over(&avglen, &support),
            mean_over(&avgcov, &complement),
            mean_over(&avglen, &complement),
        )
    };
    Ok(ExperimentReport {
        n,
        p,
        s: model.s,
        rho: model.rho_star(),
        alpha,
        replications: t,
        successes: ok,
        failures: t - ok,
        failure_messages,
        seed,
        support,
        redraw_beta: settings.redraw_beta,
        table: TableRow {
            avgcov_random_in: at(&avgcov, random_in),
            avglen_random_in: at(&avglen, random_in),
            avgcov_random_out: at(&avgcov, random_out),
            avglen_random_out: at(&avglen, random_out),
            avgcov_support: cs,
            avglen_support: ls,
            avgcov_complement: cc,
            avglen_complement: lc,
        },
        avgcov,
        avglen,
        random_in,
        random_out,
        settings: *settings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalityReport {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub coords: Vec<usize>,
    /// `δ̂_j` samples, one vector per coordinate, in replication order.
    pub samples: Vec<Vec<f64>>,
    pub ks: Vec<KsResult>,
    pub replications: usize,
    pub failures: usize,
    pub failure_messages: Vec<(usize, String)>,
    pub seed: u64,
}

/// `δ̂_j = √n(β̂ᵘ_j − β*_j)/√(Θ̂Γ̃Θ̂ᵀ)_jj` over `T` replications, with a KS
/// test against `N(0, 1)` per coordinate.
pub fn run_normality(model: &SyntheticModel, n: usize, t: usize, coords: &[usize], seed: u64, settings: &RunSettings) -> Result<NormalityReport> {
    if coords.is_empty() {
        return Err(Error::InvalidInput("need at least one coordinate".into()));
    }
    if t < KS_MIN_SAMPLES {
        return Err(Error::InvalidInput(format!("need T >= {KS_MIN_SAMPLES} replications for a KS test, got {t}")));
    }
    if let Some(&c) = coords.iter().find(|&&c| c >= model.p) {
        return Err(Error::InvalidInput(format!("coordinate {c} out of range for dimension {}", model.p)));
    }
    let outcomes = run_parallel(settings.workers, t, |rep| one_replication(model, n, 0.05, coords, seed, rep, settings))?;
    let mut samples = vec![Vec::with_capacity(t); coords.len()];
    let mut failures = 0;
    let mut failure_messages = Vec::new();
    let sqrt_n = (n as f64).sqrt();
    for (rep, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(o) => {
                for (k, &j) in coords.iter().enumerate() {
                    samples[k].push(sqrt_n * (o.centers[j] - o.beta_star[j]) / o.var[k].sqrt());
                }
            }
            Err(e) => {
                failures += 1;
                if failure_messages.len() < MAX_FAILURE_MESSAGES {
                    failure_messages.push((rep, e.to_string()));
                }
            }
        }
    }
    let ks = samples.iter().map(|s| ks_normal(s)).collect::<Result<Vec<_>>>()?;
    Ok(NormalityReport {
        n,
        p: model.p,
        rho: model.rho_star(),
        coords: coords.to_vec(),
        samples,
        ks,
        replications: t,
        failures,
        failure_messages,
        seed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSweepReport {
    pub n: usize,
    pub p: usize,
    pub known_sigma: bool,
    pub rho_grid: Vec<f64>,
    pub median_error: Vec<f64>,
    pub failures: Vec<usize>,
    /// Least-squares slope of `log(median error)` against `log(1/ρ)`.
    pub slope: f64,
    pub seed: u64,
}

/// Median `‖β̂ − β*‖₂` per rate, for the known- or unknown-covariance fit.
pub fn run_rate_sweep(model: &SyntheticModel, n: usize, rho_grid: &[f64], t: usize, seed: u64, known_sigma: bool, settings: &RunSettings) -> Result<RateSweepReport> {
    if rho_grid.len() < 2 {
        return Err(Error::InvalidInput("rate sweep needs at least two rates".into()));
    }
    if t == 0 {
        return Err(Error::InvalidInput("need at least one replication".into()));
    }
    let mut medians = Vec::with_capacity(rho_grid.len());
    let mut failures = Vec::with_capacity(rho_grid.len());
    for &rho in rho_grid {
        let m = model.with_rate(rho)?;
        let errs = run_parallel(settings.workers, t, |rep| -> Result<f64> {
            let mut rng = stream_rng(seed, rep as u64 + 1);
            let mm = rep_model(&m, settings, &mut rng)?;
            let sample = generate(&mm, n, &mut rng)?;
            let moments = if known_sigma {
                SurrogateMoments::with_population(&sample.design, sample.y.view(), mm.sigma0.view())?
            } else {
                SurrogateMoments::from_design(&sample.design, sample.y.view())?
            };
            let beta_norm = settings.tuning.oracle_beta_norm.then(|| linalg::norm_l2(mm.beta_star.view()));
            let fit = dantzig::fit(&moments, mm.noise(), &settings.tuning.dantzig(beta_norm))?;
            Ok(linalg::norm_l2((&fit.beta - &mm.beta_star).view()))
        })?;
        let mut ok: Vec<f64> = errs.iter().filter_map(|e| e.as_ref().ok().copied()).collect();
        failures.push(t - ok.len());
        medians.push(median(&mut ok));
    }
    let xs: Vec<f64> = rho_grid.iter().map(|r| (1.0 / r).ln()).collect();
    let ys: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
    Ok(RateSweepReport {
        n,
        p: model.p,
        known_sigma,
        rho_grid: rho_grid.to_vec(),
        median_error: medians,
        failures,
        slope: ls_slope(&xs, &ys),
        seed,
    })
}

pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Data-driven and oracle sandwich diagonals on `coords` for one draw.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceComparison {
    pub coords: Vec<usize>,
    pub data_driven: Vec<f64>,
    pub oracle: Vec<f64>,
}

pub fn compare_variances(model: &SyntheticModel, n: usize, coords: &[usize], seed: u64, rep: usize, tuning: &Tuning) -> Result<VarianceComparison> {
    let mut rng = stream_rng(seed, rep as u64 + 1);
    let sample = generate(model, n, &mut rng)?;
    let noise = model.noise();
    let moments = SurrogateMoments::from_design(&sample.design, sample.y.view())?;
    let beta_norm = tuning.oracle_beta_norm.then(|| linalg::norm_l2(model.beta_star.view()));
    let fit = dantzig::fit(&moments, noise, &tuning.dantzig(beta_norm))?;
    let res = infer_from_beta(
        &sample.design,
        sample.y.view(),
        &moments,
        fit.beta.view(),
        noise,
        &tuning.clime(),
        coords,
        &InferenceOptions::default(),
    )?;
    let gamma_hat = variance_oracle(sample.x_full.view(), model.rates.view(), model.beta_star.view(), model.sigma_eps)?;
    let oracle = oracle_sandwich_diag(gamma_hat.view(), model.omega.view(), coords);
    Ok(VarianceComparison {
        coords: res.coords,
        data_driven: res.var_diag,
        oracle,
    })
}
