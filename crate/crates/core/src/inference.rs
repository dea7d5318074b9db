//! De-biasing, limiting-variance estimates and coordinate-wise confidence
//! intervals.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::Serialize;

use crate::clime::{fit_clime, fit_clime_columns, ClimeConfig, PrecisionFit, SampleInfo};
use crate::dantzig::{self, DantzigConfig};
use crate::design::{gram, IncompleteDesign, MomentKind, NoiseSpec, SurrogateMoments};
use crate::error::{check_len, Error, Result, Stage};
use crate::stats::normal_quantile;

/// `β̂ + Θ̂(c̃ − Σ̃β̂)` for the coordinates in `coords`; other entries keep `β̂`.
/// Row `j` of `Θ̂` is [`PrecisionFit::debias_row`].
pub fn debias(beta: ArrayView1<f64>, precision: &PrecisionFit, moments: &SurrogateMoments, coords: &[usize]) -> Result<Array1<f64>> {
    if moments.kind != MomentKind::SurrogateUnknown {
        return Err(Error::InvalidInput("de-biasing needs surrogate moments, not a known covariance".into()));
    }
    let p = moments.p();
    check_len("coefficient length", p, beta.len())?;
    check_len("precision size", p, precision.theta.nrows())?;
    let resid = &moments.cross - &moments.sigma.dot(&beta);
    let mut out = beta.to_owned();
    for &j in coords {
        if j >= p {
            return Err(Error::InvalidInput(format!("coordinate {j} out of range for dimension {p}")));
        }
        out[j] += precision.debias_row(j).dot(&resid);
    }
    Ok(out)
}

/// Same as [`debias`] over all coordinates, with explicit rows `Θ̂`.
pub fn debias_with(beta: ArrayView1<f64>, theta: ArrayView2<f64>, moments: &SurrogateMoments) -> Result<Array1<f64>> {
    let p = moments.p();
    check_len("coefficient length", p, beta.len())?;
    if theta.dim() != (p, p) {
        return Err(Error::InvalidInput(format!("precision must be {p}x{p}, got {:?}", theta.dim())));
    }
    let resid = &moments.cross - &moments.sigma.dot(&beta);
    Ok(&beta + &theta.dot(&resid))
}

/// `q_it = (1 − ρ_t)·X_it²·β_t²·scale_t` and row sums `w_i`.
fn weights(x: ArrayView2<f64>, rates: ArrayView1<f64>, beta: ArrayView1<f64>, extra: impl Fn(usize) -> f64) -> (Array2<f64>, Array1<f64>) {
    let (n, p) = x.dim();
    let coef: Vec<f64> = (0..p).map(|t| (1.0 - rates[t]) * beta[t] * beta[t] * extra(t)).collect();
    let mut q = Array2::<f64>::zeros((n, p));
    for ((i, t), v) in q.indexed_iter_mut() {
        let xv = x[[i, t]];
        *v = coef[t] * xv * xv;
    }
    let w = q.sum_axis(Axis(1));
    (q, w)
}

/// `Υ̃_jk = (1/n) Σ_i Σ_{t≠j,k} (1 − ρ_t) X̃_ij X̃_ik X̃_it² β_t²`, evaluated as
/// `(1/n)[XᵀWX − (X∘Q)ᵀX − Xᵀ(X∘Q) + diag(Σ_i X_ij² Q_ij)]`.
pub fn upsilon_tilde(x_scaled: ArrayView2<f64>, rates: ArrayView1<f64>, beta: ArrayView1<f64>) -> Result<Array2<f64>> {
    let (n, p) = x_scaled.dim();
    check_len("rates length", p, rates.len())?;
    check_len("coefficient length", p, beta.len())?;
    let (q, w) = weights(x_scaled, rates, beta, |_| 1.0);
    let wx = &x_scaled * &w.view().insert_axis(Axis(1));
    let xq = &x_scaled * &q;
    let mut u = x_scaled.t().dot(&wx);
    let cross = xq.t().dot(&x_scaled);
    u -= &cross;
    u -= &cross.t();
    for j in 0..p {
        u[[j, j]] += x_scaled.column(j).iter().zip(q.column(j)).map(|(a, b)| a * a * b).sum::<f64>();
    }
    u /= n as f64;
    symmetrize_avg(&mut u);
    Ok(u)
}

/// `Γ̃ = (σ_ε²/n) X̃ᵀX̃ + Υ̃`.
pub fn gamma_tilde(x_scaled: ArrayView2<f64>, rates: ArrayView1<f64>, beta: ArrayView1<f64>, sigma_eps: f64) -> Result<Array2<f64>> {
    let mut g = upsilon_tilde(x_scaled, rates, beta)?;
    g.scaled_add(sigma_eps * sigma_eps, &gram(x_scaled));
    Ok(g)
}

/// `diag(Θ_S Γ̃ Θ_Sᵀ)` without forming `Γ̃`; `rows` holds one de-biasing
/// row per requested coordinate (shape `|S| × p`).
pub fn sandwich_diag(
    x_scaled: ArrayView2<f64>,
    rates: ArrayView1<f64>,
    beta: ArrayView1<f64>,
    sigma_eps: f64,
    rows: ArrayView2<f64>,
) -> Result<Array1<f64>> {
    let (n, p) = x_scaled.dim();
    check_len("rates length", p, rates.len())?;
    check_len("coefficient length", p, beta.len())?;
    check_len("de-biasing row length", p, rows.ncols())?;
    let (q, w) = weights(x_scaled, rates, beta, |_| 1.0);
    let u = x_scaled.dot(&rows.t());
    let v = (&x_scaled * &q).dot(&rows.t());
    let d: Array1<f64> = (0..p)
        .map(|t| x_scaled.column(t).iter().zip(q.column(t)).map(|(a, b)| a * a * b).sum::<f64>())
        .collect();
    let s2 = sigma_eps * sigma_eps;
    let out = (0..rows.nrows())
        .map(|k| {
            let mut acc = 0.0;
            for i in 0..n {
                let uk = u[[i, k]];
                acc += (s2 + w[i]) * uk * uk - 2.0 * v[[i, k]] * uk;
            }
            let th = rows.row(k);
            acc += th.iter().zip(d.iter()).map(|(a, b)| a * a * b).sum::<f64>();
            acc / n as f64
        })
        .collect();
    Ok(out)
}

/// `Γ̂ = (σ_ε²/n)XᵀX + (σ_ε²/n) D̃ diag(XᵀX) + Υ̂` from the complete design and
/// the true coefficients, with `D̃ = diag(1/ρ_j − 1)`.
pub fn variance_oracle(x_full: ArrayView2<f64>, rates: ArrayView1<f64>, beta_star: ArrayView1<f64>, sigma_eps: f64) -> Result<Array2<f64>> {
    let (n, p) = x_full.dim();
    check_len("rates length", p, rates.len())?;
    check_len("coefficient length", p, beta_star.len())?;
    let (q, w) = weights(x_full, rates, beta_star, |t| 1.0 / rates[t]);
    let wx = &x_full * &w.view().insert_axis(Axis(1));
    let xq = &x_full * &q;
    let mut u = x_full.t().dot(&wx);
    let cross = xq.t().dot(&x_full);
    u -= &cross;
    u -= &cross.t();
    // diagonal: (1/ρ_j)·Σ_i X_ij²(w_i − q_ij)
    for j in 0..p {
        let mut dj = 0.0;
        for i in 0..n {
            let xv = x_full[[i, j]];
            dj += xv * xv * (w[i] - q[[i, j]]);
        }
        u[[j, j]] = dj / rates[j];
    }
    u /= n as f64;
    let g = gram(x_full);
    let s2 = sigma_eps * sigma_eps;
    let mut out = g.mapv(|v| s2 * v);
    for j in 0..p {
        out[[j, j]] += s2 * (1.0 / rates[j] - 1.0) * g[[j, j]];
    }
    out += &u;
    symmetrize_avg(&mut out);
    Ok(out)
}

fn symmetrize_avg(a: &mut Array2<f64>) {
    let p = a.nrows();
    for i in 0..p {
        for j in 0..i {
            let v = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
}

/// `β̂ᵘ_j ± Φ⁻¹(1 − α/2)·√(var_j / n)`.
pub fn confidence_intervals(beta_debiased: &[f64], var_diag: &[f64], n: usize, alpha: f64) -> Result<Vec<(f64, f64)>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if beta_debiased.len() != var_diag.len() {
        return Err(Error::DimensionMismatch {
            what: "variance length",
            expected: beta_debiased.len(),
            got: var_diag.len(),
        });
    }
    let z = normal_quantile(1.0 - alpha / 2.0)?;
    beta_debiased
        .iter()
        .zip(var_diag)
        .enumerate()
        .map(|(k, (&b, &v))| {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositiveVariance { coord: k });
            }
            let h = z * (v / n as f64).sqrt();
            Ok((b - h, b + h))
        })
        .collect()
}

/// `σ̂_ε² = ‖y‖²/n − 2β̂ᵀc̃ + β̂ᵀΣ̃β̂`, the surrogate estimate of the residual
/// second moment, floored at a small positive value.
pub fn sigma_eps_plugin(y: ArrayView1<f64>, moments: &SurrogateMoments, beta: ArrayView1<f64>) -> f64 {
    let n = y.len() as f64;
    let v = y.dot(&y) / n - 2.0 * beta.dot(&moments.cross) + beta.dot(&moments.sigma.dot(&beta));
    v.max(1e-12).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InferenceOptions {
    pub alpha: f64,
    /// Replace the given `σ_ε` by [`sigma_eps_plugin`].
    pub plugin_sigma_eps: bool,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        InferenceOptions {
            alpha: 0.05,
            plugin_sigma_eps: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InferenceResult {
    pub beta_hat: Array1<f64>,
    /// De-biased estimate; coordinates outside `coords` keep `β̂` unless all
    /// precision columns were solved.
    pub beta_debiased: Array1<f64>,
    pub coords: Vec<usize>,
    /// `(Θ̂Γ̃Θ̂ᵀ)_jj` for `j` in `coords`.
    pub var_diag: Vec<f64>,
    pub intervals: Vec<(f64, f64)>,
    pub alpha: f64,
    pub n: usize,
    pub lambda_used: f64,
    pub lambda_stage1: Option<f64>,
    pub nu_used: f64,
    pub sigma_eps_used: f64,
    pub sigma_x_used: f64,
    pub rates_estimated: bool,
}

/// Fit → CLIME → de-bias → variance → intervals. An empty `coords` means
/// every coordinate.
pub fn run_inference(
    d: &IncompleteDesign,
    y: ArrayView1<f64>,
    noise: NoiseSpec,
    dantzig_cfg: &DantzigConfig,
    clime_cfg: &ClimeConfig,
    coords: &[usize],
    opts: &InferenceOptions,
) -> Result<InferenceResult> {
    let moments = SurrogateMoments::from_design(d, y).map_err(|e| e.at(Stage::Design))?;
    let fit = dantzig::fit(&moments, noise, dantzig_cfg)?;
    let mut out = infer_from_beta(d, y, &moments, fit.beta.view(), noise, clime_cfg, coords, opts)?;
    out.lambda_used = fit.lambda_used;
    out.lambda_stage1 = fit.lambda_stage1;
    Ok(out)
}

/// Everything after the point estimate, for a given `β̂`.
#[allow(clippy::too_many_arguments)]
pub fn infer_from_beta(
    d: &IncompleteDesign,
    y: ArrayView1<f64>,
    moments: &SurrogateMoments,
    beta: ArrayView1<f64>,
    noise: NoiseSpec,
    clime_cfg: &ClimeConfig,
    coords: &[usize],
    opts: &InferenceOptions,
) -> Result<InferenceResult> {
    let p = d.p();
    check_len("coefficient length", p, beta.len()).map_err(|e| e.at(Stage::Inference))?;
    let coords: Vec<usize> = if coords.is_empty() { (0..p).collect() } else { coords.to_vec() };
    if let Some(&c) = coords.iter().find(|&&c| c >= p) {
        return Err(Error::InvalidInput(format!("coordinate {c} out of range for dimension {p}")).at(Stage::Inference));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {}", opts.alpha)).at(Stage::Inference));
    }
    let sample = SampleInfo {
        n: d.n(),
        rho_star: d.rho_star(),
        sigma_x: noise.sigma_x,
    };
    let precision = if clime_cfg.symmetrize {
        fit_clime(moments.sigma.view(), clime_cfg, Some(sample))?
    } else {
        fit_clime_columns(moments.sigma.view(), clime_cfg, Some(sample), &coords)?
    };
    let debias_coords: Vec<usize> = if precision.columns.len() == p { (0..p).collect() } else { coords.clone() };
    let beta_u = debias(beta, &precision, moments, &debias_coords).map_err(|e| e.at(Stage::Inference))?;

    let sigma_eps = if opts.plugin_sigma_eps {
        sigma_eps_plugin(y, moments, beta)
    } else {
        noise.sigma_eps
    };
    if !(sigma_eps > 0.0) {
        return Err(Error::InvalidInput("sigma_eps must be positive for inference".into()).at(Stage::Inference));
    }
    let mut rows = Array2::<f64>::zeros((coords.len(), p));
    for (k, &j) in coords.iter().enumerate() {
        rows.row_mut(k).assign(&precision.debias_row(j));
    }
    let xs = d.scaled_design();
    let var = sandwich_diag(xs.view(), d.rates(), beta, sigma_eps, rows.view()).map_err(|e| e.at(Stage::Inference))?;
    let var_diag = var.to_vec();
    let centers: Vec<f64> = coords.iter().map(|&j| beta_u[j]).collect();
    let intervals = confidence_intervals(&centers, &var_diag, d.n(), opts.alpha)
        .map_err(|e| match e {
            Error::NonPositiveVariance { coord } => Error::NonPositiveVariance { coord: coords[coord] },
            e => e,
        })
        .map_err(|e| e.at(Stage::Inference))?;
    Ok(InferenceResult {
        beta_hat: beta.to_owned(),
        beta_debiased: beta_u,
        coords,
        var_diag,
        intervals,
        alpha: opts.alpha,
        n: d.n(),
        lambda_used: f64::NAN,
        lambda_stage1: None,
        nu_used: precision.nu_used,
        sigma_eps_used: sigma_eps,
        sigma_x_used: noise.sigma_x,
        rates_estimated: d.rates_estimated(),
    })
}

/// `diag(Σ₀⁻¹ Γ̂ Σ₀⁻¹)` restricted to `coords`.
pub fn oracle_sandwich_diag(gamma_hat: ArrayView2<f64>, sigma0_inv: ArrayView2<f64>, coords: &[usize]) -> Vec<f64> {
    coords
        .iter()
        .map(|&j| {
            let r = sigma0_inv.row(j);
            r.dot(&gamma_hat.dot(&r))
        })
        .collect()
}

/// Naive triple-sum `Υ̃`, the reference for [`upsilon_tilde`].
pub fn upsilon_tilde_naive(x_scaled: ArrayView2<f64>, rates: ArrayView1<f64>, beta: ArrayView1<f64>) -> Array2<f64> {
    let (n, p) = x_scaled.dim();
    let mut u = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        for k in 0..p {
            let mut acc = 0.0;
            for i in 0..n {
                for t in 0..p {
                    if t == j || t == k {
                        continue;
                    }
                    let xt = x_scaled[[i, t]];
                    acc += (1.0 - rates[t]) * x_scaled[[i, j]] * x_scaled[[i, k]] * xt * xt * beta[t] * beta[t];
                }
            }
            u[[j, k]] = acc / n as f64;
        }
    }
    u
}
