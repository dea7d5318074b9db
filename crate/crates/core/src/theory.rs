//! Observed-data likelihood under MCAR masking and the KL computations used
//! to check the lower-bound constructions numerically.
//!
//! A hypothesis is a joint model `x ~ N(0, Σ)`, `y = xᵀβ + ε`,
//! `ε ~ N(0, σ_ε²)`, with every covariate observed independently with
//! probability `ρ`. Logarithms follow the convention `0 · ln 0 = 0`.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand::seq::IndexedRandom;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::linalg::{self, Cholesky};
use crate::simulation::stream_rng;

/// Largest dimension for exact enumeration over masks.
pub const MAX_ENUMERATION_DIM: usize = 20;
/// Smallest Monte-Carlo sample accepted by [`kl_montecarlo`].
pub const MIN_MC_SAMPLES: usize = 1000;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const MC_CHUNK: usize = 1024;

#[derive(Debug, Clone, Serialize)]
pub struct Hypothesis {
    pub beta: Array1<f64>,
    pub sigma: Array2<f64>,
    pub sigma_eps: f64,
    pub rho: f64,
    #[serde(skip)]
    factor: Cholesky,
}

impl Hypothesis {
    /// Validates `Σ` by factorization. `ρ = 0` is allowed (nothing observed).
    pub fn new(beta: Array1<f64>, sigma: Array2<f64>, sigma_eps: f64, rho: f64) -> Result<Self> {
        let p = beta.len();
        if p == 0 {
            return Err(Error::InvalidInput("hypothesis needs p >= 1".into()));
        }
        if sigma.dim() != (p, p) {
            return Err(Error::InvalidInput(format!(
                "covariance has shape {:?}, expected ({p}, {p})",
                sigma.dim()
            )));
        }
        for i in 0..p {
            for j in 0..i {
                if (sigma[[i, j]] - sigma[[j, i]]).abs() > 1e-12 * (1.0 + sigma[[i, j]].abs()) {
                    return Err(Error::InvalidInput(format!("covariance is not symmetric at ({i}, {j})")));
                }
            }
        }
        if !(sigma_eps > 0.0 && sigma_eps.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma_eps must be positive, got {sigma_eps}")));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidInput(format!("rho must lie in [0, 1], got {rho}")));
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("beta has non-finite entries".into()));
        }
        let factor = Cholesky::new(sigma.view())?;
        Ok(Hypothesis { beta, sigma, sigma_eps, rho, factor })
    }

    /// `Σ = I`.
    pub fn identity(beta: Array1<f64>, sigma_eps: f64, rho: f64) -> Result<Self> {
        let p = beta.len();
        Hypothesis::new(beta, Array2::eye(p), sigma_eps, rho)
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    /// One draw of `(y, x, mask)`; unobserved entries of `x` are set to zero.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, Array1<f64>, Vec<bool>) {
        let p = self.p();
        let z: Array1<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut x = self.factor.lower().dot(&z);
        let eps: f64 = rng.sample(StandardNormal);
        let y = x.dot(&self.beta) + self.sigma_eps * eps;
        let mask: Vec<bool> = (0..p).map(|_| rng.random::<f64>() < self.rho).collect();
        for (v, &o) in x.iter_mut().zip(&mask) {
            if !o {
                *v = 0.0;
            }
        }
        (y, x, mask)
    }
}

/// `q ln ρ + (p − q) ln(1 − ρ)` with `0 · ln 0 = 0`.
fn log_mask_prob(q: usize, p: usize, rho: f64) -> f64 {
    let term = |k: usize, v: f64| if k == 0 { 0.0 } else { k as f64 * v.ln() };
    term(q, rho) + term(p - q, 1.0 - rho)
}

/// Joint covariance of `(x_obs, y)` for the given observed set.
fn observed_covariance(h: &Hypothesis, obs: &[usize]) -> Array2<f64> {
    let q = obs.len();
    let sb = h.sigma.dot(&h.beta);
    let mut s = Array2::<f64>::zeros((q + 1, q + 1));
    for (a, &i) in obs.iter().enumerate() {
        for (b, &j) in obs.iter().enumerate() {
            s[[a, b]] = h.sigma[[i, j]];
        }
        s[[a, q]] = sb[i];
        s[[q, a]] = sb[i];
    }
    s[[q, q]] = h.sigma_eps * h.sigma_eps + h.beta.dot(&sb);
    s
}

/// `log p(y, x_obs, mask)`. The regression density is conditioned on the
/// observed block through a Cholesky factor of `Σ₁₁`; with nothing observed
/// it is the marginal `N(0, σ_ε² + βᵀΣβ)`.
pub fn observed_loglik(y: f64, x: ArrayView1<f64>, mask: &[bool], h: &Hypothesis) -> Result<f64> {
    let p = h.p();
    check_len("covariates", p, x.len())?;
    check_len("mask", p, mask.len())?;
    let obs: Vec<usize> = (0..p).filter(|&j| mask[j]).collect();
    let mis: Vec<usize> = (0..p).filter(|&j| !mask[j]).collect();
    let q = obs.len();
    let mut ll = log_mask_prob(q, p, h.rho);

    let xo: Array1<f64> = obs.iter().map(|&j| x[j]).collect();
    let bo: Array1<f64> = obs.iter().map(|&j| h.beta[j]).collect();
    let bm: Array1<f64> = mis.iter().map(|&j| h.beta[j]).collect();
    let s22 = h.sigma.select(Axis(0), &mis).select(Axis(1), &mis);
    let (mean, var) = if q == 0 {
        (0.0, h.sigma_eps * h.sigma_eps + bm.dot(&s22.dot(&bm)))
    } else {
        let s11 = h.sigma.select(Axis(0), &obs).select(Axis(1), &obs);
        let ch = Cholesky::new(s11.view())?;
        // Mahalanobis term through the forward solve
        let mut z = xo.to_vec();
        ch.forward(&mut z);
        let maha: f64 = z.iter().map(|v| v * v).sum();
        ll += -0.5 * (q as f64 * LN_2PI + ch.log_det() + maha);
        if mis.is_empty() {
            (xo.dot(&bo), h.sigma_eps * h.sigma_eps)
        } else {
            let s21 = h.sigma.select(Axis(0), &mis).select(Axis(1), &obs);
            // Σ₁₁⁻¹ Σ₁₂ β_mis
            let g = ch.solve(s21.t().dot(&bm).view());
            let s22_1 = &s22 - &s21.dot(&solve_columns(&ch, &s21.t().to_owned()));
            (xo.dot(&bo) + xo.dot(&g), h.sigma_eps * h.sigma_eps + bm.dot(&s22_1.dot(&bm)))
        }
    };
    if !(var > 0.0) {
        return Err(Error::Singular(format!("conditional variance of y is {var:.3e}")));
    }
    let r = y - mean;
    ll += -0.5 * (LN_2PI + var.ln() + r * r / var);
    Ok(ll)
}

fn solve_columns(ch: &Cholesky, b: &Array2<f64>) -> Array2<f64> {
    let mut out = b.clone();
    for mut col in out.columns_mut() {
        let s = ch.solve(col.view());
        col.assign(&s);
    }
    out
}

/// KL divergence between two zero-mean Gaussians with covariances `s0`, `s1`.
fn gaussian_kl(s0: &Array2<f64>, s1: &Array2<f64>) -> Result<f64> {
    let d = s0.nrows() as f64;
    let c0 = Cholesky::new(s0.view())?;
    let c1 = Cholesky::new(s1.view())?;
    let tr = solve_columns(&c1, s0).diag().sum();
    Ok(0.5 * (tr - d + c1.log_det() - c0.log_det()))
}

fn check_pair(h0: &Hypothesis, h1: &Hypothesis) -> Result<()> {
    check_len("second hypothesis dimension", h0.p(), h1.p())?;
    if h0.rho != h1.rho {
        return Err(Error::InvalidInput(format!(
            "hypotheses must share the observation rate, got {} and {}",
            h0.rho, h1.rho
        )));
    }
    Ok(())
}

fn check_enumerable(p: usize) -> Result<()> {
    if p > MAX_ENUMERATION_DIM {
        return Err(Error::InvalidInput(format!(
            "exact enumeration supports p <= {MAX_ENUMERATION_DIM}, got {p}; use the Monte-Carlo estimator"
        )));
    }
    Ok(())
}

/// Sums `weight(mask) · term(mask)` over all `2^p` masks with positive
/// weight, in mask order.
fn sum_over_masks(p: usize, rho: f64, term: impl Fn(&[usize]) -> Result<f64> + Sync) -> Result<f64> {
    let parts: Vec<Result<f64>> = (0u64..(1u64 << p))
        .into_par_iter()
        .map(|bits| {
            let obs: Vec<usize> = (0..p).filter(|&j| bits >> j & 1 == 1).collect();
            let lw = log_mask_prob(obs.len(), p, rho);
            let w = if (rho == 0.0 && !obs.is_empty()) || (rho == 1.0 && obs.len() < p) {
                0.0
            } else {
                lw.exp()
            };
            if w == 0.0 {
                return Ok(0.0);
            }
            Ok(w * term(&obs)?)
        })
        .collect();
    parts.into_iter().sum()
}

/// Exact `KL(P₀ ‖ P₁)` of the observed data `(mask, x_obs, y)`, by
/// enumeration over masks of the Gaussian KL of `(x_obs, y)`.
pub fn kl_exact(h0: &Hypothesis, h1: &Hypothesis) -> Result<f64> {
    check_pair(h0, h1)?;
    check_enumerable(h0.p())?;
    sum_over_masks(h0.p(), h0.rho, |obs| {
        gaussian_kl(&observed_covariance(h0, obs), &observed_covariance(h1, obs))
    })
}

fn identity_terms(beta0: ArrayView1<f64>, beta1: ArrayView1<f64>, sigma_eps: f64, rho: f64) -> Result<()> {
    check_len("beta1", beta0.len(), beta1.len())?;
    check_enumerable(beta0.len())?;
    if !(sigma_eps > 0.0) {
        return Err(Error::InvalidInput(format!("sigma_eps must be positive, got {sigma_eps}")));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidInput(format!("rho must lie in [0, 1], got {rho}")));
    }
    Ok(())
}

fn split_norms(beta0: ArrayView1<f64>, beta1: ArrayView1<f64>, obs: &[usize]) -> (f64, f64, f64) {
    let mut in_obs = vec![false; beta0.len()];
    for &j in obs {
        in_obs[j] = true;
    }
    let (mut m0, mut m1, mut d) = (0.0, 0.0, 0.0);
    for j in 0..beta0.len() {
        if in_obs[j] {
            d += (beta0[j] - beta1[j]).powi(2);
        } else {
            m0 += beta0[j] * beta0[j];
            m1 += beta1[j] * beta1[j];
        }
    }
    (m0, m1, d)
}

/// Exact `KL(P_β₀ ‖ P_β₁)` with `Σ = I`: per mask, with
/// `v = σ_ε² + ‖β_mis‖²`,
/// `½[ln(v₁/v₀) + v₀/v₁ − 1] + ‖β₀,obs − β₁,obs‖² / (2v₁)`.
pub fn kl_identity_covariance(beta0: ArrayView1<f64>, beta1: ArrayView1<f64>, sigma_eps: f64, rho: f64) -> Result<f64> {
    identity_terms(beta0, beta1, sigma_eps, rho)?;
    let s2 = sigma_eps * sigma_eps;
    sum_over_masks(beta0.len(), rho, |obs| {
        let (m0, m1, d) = split_norms(beta0, beta1, obs);
        let (v0, v1) = (s2 + m0, s2 + m1);
        Ok(0.5 * ((v1 / v0).ln() + v0 / v1 - 1.0) + 0.5 * d / v1)
    })
}

/// Upper bound on [`kl_identity_covariance`] from `ln t ≤ t − 1`:
/// per mask `½(v₁ − v₀)²/(v₀v₁) + ‖β₀,obs − β₁,obs‖²/(2v₁)`.
pub fn kl_identity_bound(beta0: ArrayView1<f64>, beta1: ArrayView1<f64>, sigma_eps: f64, rho: f64) -> Result<f64> {
    identity_terms(beta0, beta1, sigma_eps, rho)?;
    let s2 = sigma_eps * sigma_eps;
    sum_over_masks(beta0.len(), rho, |obs| {
        let (m0, m1, d) = split_norms(beta0, beta1, obs);
        let (v0, v1) = (s2 + m0, s2 + m1);
        Ok(0.5 * (v1 - v0).powi(2) / (v0 * v1) + 0.5 * d / v1)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Monte-Carlo `KL(P₀ ‖ P₁)`: mean log-likelihood ratio over draws from `h0`.
pub fn kl_montecarlo(h0: &Hypothesis, h1: &Hypothesis, samples: usize, seed: u64) -> Result<McEstimate> {
    check_pair(h0, h1)?;
    if samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_MC_SAMPLES} Monte-Carlo samples, got {samples}"
        )));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<Result<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let (y, x, mask) = h0.draw(&mut rng);
                let r = observed_loglik(y, x.view(), &mask, h0)? - observed_loglik(y, x.view(), &mask, h1)?;
                if !r.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite log-likelihood ratio at y = {y}, x = {x}, mask = {}",
                        mask_string(&mask)
                    )));
                }
                s += r;
                s2 += r * r;
            }
            Ok((s, s2))
        })
        .collect();
    let (mut s, mut s2) = (0.0, 0.0);
    for part in parts {
        let (a, b) = part?;
        s += a;
        s2 += b;
    }
    let n = samples as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate { estimate: mean, stderr: (var / n).sqrt(), samples })
}

fn mask_string(mask: &[bool]) -> String {
    mask.iter().map(|&o| if o { '1' } else { '0' }).collect()
}

/// Sparse vectors with `s/2` leading entries `a = √(2M²/s − δ²)` followed by
/// `s/2` entries `±δ` placed in the remaining coordinates. Sign patterns are
/// drawn at random and kept greedily when their Hamming distance to every
/// kept pattern is at least `s/2`, so distinct members are at least
/// `√(s/4)·δ` apart in ℓ2 and all have norm `M`.
pub fn packing_hypotheses(p: usize, s: usize, m: f64, delta: f64, max_members: usize, seed: u64) -> Result<Vec<Array1<f64>>> {
    if p % 2 != 0 || s % 2 != 0 || s == 0 {
        return Err(Error::InvalidInput(format!("p and s must be even and positive, got p = {p}, s = {s}")));
    }
    if 5 * s >= 4 * p {
        return Err(Error::InvalidInput(format!("need s < 4p/5, got p = {p}, s = {s}")));
    }
    if !(m > 0.0 && delta > 0.0) {
        return Err(Error::InvalidInput("M and delta must be positive".into()));
    }
    let a2 = 2.0 * m * m / s as f64 - delta * delta;
    if !(a2 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "delta = {delta} too large: need delta^2 < 2M^2/s = {}",
            2.0 * m * m / s as f64
        )));
    }
    let a = a2.sqrt();
    let half = s / 2;
    let tail = p - half;
    let mut rng = stream_rng(seed, 0);
    let mut kept: Vec<Vec<i8>> = Vec::new();
    let mut misses = 0usize;
    let positions: Vec<usize> = (0..tail).collect();
    while kept.len() < max_members && misses < 1000 {
        let mut z = vec![0i8; tail];
        for &j in positions.choose_multiple(&mut rng, half) {
            z[j] = if rng.random::<bool>() { 1 } else { -1 };
        }
        let far = kept.iter().all(|k| k.iter().zip(&z).filter(|(u, v)| u != v).count() >= half);
        if far {
            kept.push(z);
            misses = 0;
        } else {
            misses += 1;
        }
    }
    Ok(kept
        .into_iter()
        .map(|z| {
            let mut b = Array1::<f64>::zeros(p);
            b.slice_mut(ndarray::s![..half]).fill(a);
            for (j, v) in z.into_iter().enumerate() {
                b[half + j] = v as f64 * delta;
            }
            b
        })
        .collect())
}

/// The two-point construction for the single-coordinate lower bound
/// (0-based indices): `β` has `s − 2` entries `ã/√(s−2)`, then `ã` at index
/// `s − 2`, and `±ãγ` at index `j`; `Σ = I ∓ γ(e_{s−2}e_jᵀ + e_je_{s−2}ᵀ)`,
/// with `ã = √(M²/(2+γ²))`.
pub fn coupled_pair(p: usize, s: usize, m: f64, gamma: f64, j: usize, sigma_eps: f64, rho: f64) -> Result<(Hypothesis, Hypothesis)> {
    if s < 4 {
        return Err(Error::InvalidInput(format!("need s >= 4, got {s}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidInput(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if j + 1 < s || j >= p {
        return Err(Error::InvalidInput(format!(
            "coordinate j must satisfy {} <= j < {p}, got {j}",
            s - 1
        )));
    }
    if !(m > 0.0) {
        return Err(Error::InvalidInput("M must be positive".into()));
    }
    let at = (m * m / (2.0 + gamma * gamma)).sqrt();
    let k = s - 2;
    let build = |sign: f64| -> Result<Hypothesis> {
        let mut beta = Array1::<f64>::zeros(p);
        beta.slice_mut(ndarray::s![..k]).fill(at / (k as f64).sqrt());
        beta[k] = at;
        beta[j] = sign * at * gamma;
        let mut sigma = Array2::<f64>::eye(p);
        sigma[[k, j]] = -sign * gamma;
        sigma[[j, k]] = -sign * gamma;
        let ev = linalg::symmetric_eigenvalues(sigma.view());
        if ev.iter().any(|&e| e < 1.0 - gamma - 1e-12 || e > 1.0 + gamma + 1e-12) {
            return Err(Error::Singular("construction eigenvalues left [1 - gamma, 1 + gamma]".into()));
        }
        Hypothesis::new(beta, sigma, sigma_eps, rho)
    };
    Ok((build(1.0)?, build(-1.0)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub trials: usize,
    /// Largest `|ℓ₀ − ℓ₁|` over draws that do not observe both coordinates.
    pub max_discrepancy: f64,
    pub violations: usize,
    /// Mask of the first violating draw, as a 0/1 string.
    pub counterexample: Option<String>,
    pub both_observed: usize,
    pub both_observed_fraction: f64,
    /// Binomial standard error of the fraction around `ρ²`.
    pub binomial_se: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Tolerance on log-likelihood discrepancies in [`check_likelihood_equivalence`].
pub const EQUIVALENCE_TOL: f64 = 1e-9;

/// Draws from the first hypothesis and checks that the two observed-data
/// log-likelihoods agree whenever coordinates `k` and `j` (the two coupled
/// by the covariance perturbation) are not both observed.
pub fn check_likelihood_equivalence(pair: &(Hypothesis, Hypothesis), k: usize, j: usize, trials: usize, seed: u64) -> Result<EquivalenceReport> {
    let (h0, h1) = pair;
    check_pair(h0, h1)?;
    let p = h0.p();
    if k >= p || j >= p || k == j {
        return Err(Error::InvalidInput(format!("coupled coordinates ({k}, {j}) invalid for p = {p}")));
    }
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be positive".into()));
    }
    let chunks = trials.div_ceil(MC_CHUNK);
    let parts: Vec<Result<(f64, usize, Option<String>, usize)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let len = MC_CHUNK.min(trials - c * MC_CHUNK);
            let (mut worst, mut viol, mut first, mut both) = (0.0f64, 0usize, None, 0usize);
            for _ in 0..len {
                let (y, x, mask) = h0.draw(&mut rng);
                if mask[k] && mask[j] {
                    both += 1;
                    continue;
                }
                let d = (observed_loglik(y, x.view(), &mask, h0)? - observed_loglik(y, x.view(), &mask, h1)?).abs();
                worst = worst.max(d);
                if !(d <= EQUIVALENCE_TOL) {
                    viol += 1;
                    first.get_or_insert_with(|| mask_string(&mask));
                }
            }
            Ok((worst, viol, first, both))
        })
        .collect();
    let (mut worst, mut violations, mut counterexample, mut both) = (0.0f64, 0usize, None, 0usize);
    for part in parts {
        let (w, v, f, b) = part?;
        worst = worst.max(w);
        violations += v;
        if counterexample.is_none() {
            counterexample = f;
        }
        both += b;
    }
    let r2 = h0.rho * h0.rho;
    Ok(EquivalenceReport {
        trials,
        max_discrepancy: worst,
        violations,
        counterexample,
        both_observed: both,
        both_observed_fraction: both as f64 / trials as f64,
        binomial_se: (r2 * (1.0 - r2) / trials as f64).sqrt(),
        tolerance: EQUIVALENCE_TOL,
        passed: violations == 0,
    })
}
