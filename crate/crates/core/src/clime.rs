//! Column-wise CLIME: for each target column `i`,
//!
//! ```text
//! minimize ‖ω‖₁   subject to   ‖Σ ω − e_i‖_∞ ≤ ν
//! ```
//!
//! All columns share one factorization and are iterated as one block.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::dantzig::log_dim;
use crate::error::{Error, Result, Stage};
use crate::solver::{L1LinfSolver, SolveReport, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Nu {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClimeConfig {
    pub nu: Nu,
    pub auto_constant: f64,
    /// Guess for `‖Σ₀⁻¹‖_{L1}` in the automatic ν.
    pub b1_guess: f64,
    /// Keep the smaller-magnitude entry of each `{θ_jk, θ_kj}` pair.
    pub symmetrize: bool,
    pub solver: SolverConfig,
}

impl Default for ClimeConfig {
    fn default() -> Self {
        ClimeConfig {
            nu: Nu::Auto,
            auto_constant: 1.0,
            b1_guess: 2.0,
            symmetrize: true,
            solver: SolverConfig::default(),
        }
    }
}

impl ClimeConfig {
    pub fn fixed(nu: f64) -> Self {
        ClimeConfig {
            nu: Nu::Fixed(nu),
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if let Nu::Fixed(v) = self.nu {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("nu must be positive, got {v}")));
            }
        }
        if !(self.auto_constant > 0.0 && self.auto_constant.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "auto constant must be positive, got {}",
                self.auto_constant
            )));
        }
        if !(self.b1_guess > 0.0 && self.b1_guess.is_finite()) {
            return Err(Error::InvalidInput(format!("b1 guess must be positive, got {}", self.b1_guess)));
        }
        self.solver.validate()
    }
}

/// Sample quantities the automatic ν depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleInfo {
    pub n: usize,
    pub rho_star: f64,
    pub sigma_x: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PrecisionFit {
    /// Assembled estimate; column `i` is the solution for target `e_i`
    /// (symmetrized when requested).
    pub theta: Array2<f64>,
    /// Column solutions before symmetrization. Unsolved columns are zero.
    pub raw: Array2<f64>,
    pub nu_used: f64,
    /// Solved columns, in increasing order.
    pub columns: Vec<usize>,
    /// One report per entry of `columns`.
    pub column_reports: Vec<SolveReport>,
    pub symmetrized: bool,
}

impl PrecisionFit {
    /// The de-biasing row for coordinate `j`: column `j` of `theta`. Without
    /// symmetrization it satisfies `‖ωᵀΣ − e_jᵀ‖_∞ ≤ ν` because `Σ` is
    /// symmetric; with it `theta` is symmetric and row and column coincide.
    pub fn debias_row(&self, j: usize) -> ArrayView1<'_, f64> {
        self.theta.column(j)
    }
}

/// `constant · σ_x² · b1 · √(log p / (ρ_*² n))`.
pub fn auto_nu(n: usize, p: usize, rho_star: f64, sigma_x: f64, b1: f64, constant: f64) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput("n and p must be positive".into()));
    }
    if !(rho_star > 0.0 && rho_star <= 1.0) {
        return Err(Error::InvalidInput(format!("rho_star must lie in (0, 1], got {rho_star}")));
    }
    Ok(constant * sigma_x * sigma_x * b1 * (log_dim(p) / (rho_star * rho_star * n as f64)).sqrt())
}

/// Solves every column.
pub fn fit_clime(sigma: ArrayView2<f64>, cfg: &ClimeConfig, sample: Option<SampleInfo>) -> Result<PrecisionFit> {
    let p = sigma.nrows();
    let all: Vec<usize> = (0..p).collect();
    fit_clime_columns(sigma, cfg, sample, &all)
}

/// Solves only the listed columns; symmetrization then requires all of them.
pub fn fit_clime_columns(
    sigma: ArrayView2<f64>,
    cfg: &ClimeConfig,
    sample: Option<SampleInfo>,
    columns: &[usize],
) -> Result<PrecisionFit> {
    inner(sigma, cfg, sample, columns).map_err(|e| e.at(Stage::Clime))
}

fn inner(sigma: ArrayView2<f64>, cfg: &ClimeConfig, sample: Option<SampleInfo>, columns: &[usize]) -> Result<PrecisionFit> {
    cfg.validate()?;
    let p = sigma.nrows();
    if sigma.ncols() != p {
        return Err(Error::InvalidInput(format!("covariance must be square, got {:?}", sigma.dim())));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("covariance has non-finite entries".into()));
    }
    for i in 0..p {
        for j in 0..i {
            if sigma[[i, j]] != sigma[[j, i]] {
                return Err(Error::InvalidInput(format!("covariance is not symmetric at ({i}, {j})")));
            }
        }
    }
    let mut cols = columns.to_vec();
    cols.sort_unstable();
    cols.dedup();
    if let Some(&c) = cols.iter().find(|&&c| c >= p) {
        return Err(Error::InvalidInput(format!("column {c} out of range for dimension {p}")));
    }
    if cfg.symmetrize && cols.len() != p {
        return Err(Error::InvalidInput("symmetrization needs every column".into()));
    }
    let nu = match cfg.nu {
        Nu::Fixed(v) => v,
        Nu::Auto => {
            let s = sample.ok_or_else(|| {
                Error::InvalidInput("automatic nu needs n, rho_star and sigma_x; give nu explicitly".into())
            })?;
            let v = auto_nu(s.n, p, s.rho_star, s.sigma_x, cfg.b1_guess, cfg.auto_constant)?;
            if !(v > 0.0) {
                return Err(Error::InvalidInput("automatic nu is zero; sigma_x must be positive".into()));
            }
            v
        }
    };

    let solver = L1LinfSolver::new(sigma)?;
    let mut rhs = Array2::<f64>::zeros((p, cols.len()));
    for (k, &c) in cols.iter().enumerate() {
        rhs[[c, k]] = 1.0;
    }
    let results = solver.solve_batch(rhs.view(), nu, &cfg.solver, None)?;
    let mut raw = Array2::<f64>::zeros((p, p));
    let mut reports = Vec::with_capacity(cols.len());
    for (&c, r) in cols.iter().zip(results) {
        let r = r.map_err(|e| match e {
            Error::Infeasible(_) => Error::Infeasible(format!(
                "column {c} has no solution at nu = {nu:.6e}; increase nu"
            )),
            e => e,
        })?;
        if !r.converged {
            return Err(Error::NotConverged {
                iterations: r.iterations,
                primal_residual: r.primal_residual,
                dual_residual: r.dual_residual,
            });
        }
        raw.column_mut(c).assign(&r.solution);
        reports.push(r);
    }
    let theta = if cfg.symmetrize { symmetrize_min_abs(&raw) } else { raw.clone() };
    Ok(PrecisionFit {
        theta,
        raw,
        nu_used: nu,
        columns: cols,
        column_reports: reports,
        symmetrized: cfg.symmetrize,
    })
}

/// `θ_jk ← ` whichever of `θ_jk`, `θ_kj` is smaller in magnitude.
pub fn symmetrize_min_abs(theta: &Array2<f64>) -> Array2<f64> {
    let p = theta.nrows();
    let mut out = theta.clone();
    for j in 0..p {
        for k in 0..j {
            let a = theta[[j, k]];
            let b = theta[[k, j]];
            let v = if a.abs() <= b.abs() { a } else { b };
            out[[j, k]] = v;
            out[[k, j]] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::solver::lp_oracle;
    use ndarray::array;

    #[test]
    fn identity_shrinks_diagonal() {
        let fit = fit_clime(Array2::<f64>::eye(4).view(), &ClimeConfig::fixed(0.1), None).unwrap();
        let want = Array2::<f64>::eye(4) * 0.9;
        assert!(max_abs((&fit.raw - &want).view()) < 1e-9);
        assert!(max_abs((&fit.theta - &want).view()) < 1e-9);
    }

    #[test]
    fn auto_nu_examples() {
        // p = 3: ν = √(ln 3 / 100)
        let v = auto_nu(100, 3, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((v - (3f64.ln() / 100.0).sqrt()).abs() < 1e-15);
        let a = auto_nu(100, 10, 0.8, 1.0, 2.0, 1.0).unwrap();
        let b = auto_nu(100, 10, 0.4, 1.0, 2.0, 1.0).unwrap();
        assert!((b / a - 2.0).abs() < 1e-12);
        assert_eq!(auto_nu(100, 10, 0.8, 1.0, 0.0, 1.0).unwrap(), 0.0);
        let mut cfg = ClimeConfig::default();
        cfg.b1_guess = 0.0;
        assert!(fit_clime(Array2::<f64>::eye(2).view(), &cfg, None).is_err());
    }

    #[test]
    fn columns_match_lp() {
        let s = array![[2.0, 0.5, 0.1], [0.5, 1.5, -0.3], [0.1, -0.3, 1.0]];
        let mut cfg = ClimeConfig::fixed(0.05);
        cfg.symmetrize = false;
        let fit = fit_clime(s.view(), &cfg, None).unwrap();
        for i in 0..3 {
            let mut e = ndarray::Array1::zeros(3);
            e[i] = 1.0;
            let lp = lp_oracle(s.view(), e.view(), 0.05).unwrap();
            let lp_obj: f64 = lp.iter().map(|v| v.abs()).sum();
            assert!((fit.column_reports[i].objective - lp_obj).abs() < 1e-6);
        }
    }

    #[test]
    fn infeasible_column_is_named() {
        let s = array![[1.0, 0.0], [0.0, 0.0]];
        let mut cfg = ClimeConfig::fixed(0.1);
        cfg.symmetrize = false;
        let err = fit_clime(s.view(), &cfg, None).unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Clime));
        assert!(err.to_string().contains("column 1"), "{err}");
    }

    #[test]
    fn subset_requires_no_symmetrization() {
        let s = Array2::<f64>::eye(3);
        assert!(fit_clime_columns(s.view(), &ClimeConfig::fixed(0.1), None, &[1]).is_err());
        let mut cfg = ClimeConfig::fixed(0.1);
        cfg.symmetrize = false;
        let fit = fit_clime_columns(s.view(), &cfg, None, &[2, 1]).unwrap();
        assert_eq!(fit.columns, vec![1, 2]);
        assert_eq!(fit.raw.column(0).sum(), 0.0);
    }

    #[test]
    fn min_abs_rule() {
        let t = array![[1.0, -0.2], [0.5, 2.0]];
        let s = symmetrize_min_abs(&t);
        assert_eq!(s, array![[1.0, -0.2], [-0.2, 2.0]]);
    }
}
