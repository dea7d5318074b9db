//! Modified Dantzig selector over surrogate (or population) moments:
//!
//! ```text
//! minimize ‖β‖₁   subject to   ‖c̃ − Σ β‖_∞ ≤ λ
//! ```

use ndarray::{Array1, ArrayView1};
use serde::Serialize;

use crate::design::{MomentKind, NoiseSpec, SurrogateMoments};
use crate::error::{Error, Result, Stage};
use crate::linalg;
use crate::solver::{L1LinfSolver, SolveReport, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Lambda {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DantzigConfig {
    pub lambda: Lambda,
    /// Multiplies the rate formula in [`auto_lambda`].
    pub auto_constant: f64,
    /// Plug-in value for `‖β*‖₂`. `None` means the two-stage scheme of
    /// [`fit_auto`].
    pub beta_norm_guess: Option<f64>,
    pub solver: SolverConfig,
}

impl Default for DantzigConfig {
    fn default() -> Self {
        DantzigConfig {
            lambda: Lambda::Auto,
            auto_constant: 1.0,
            beta_norm_guess: None,
            solver: SolverConfig::default(),
        }
    }
}

impl DantzigConfig {
    pub fn fixed(lambda: f64) -> Self {
        DantzigConfig {
            lambda: Lambda::Fixed(lambda),
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if let Lambda::Fixed(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidInput(format!("lambda must be positive, got {l}")));
            }
        }
        if !(self.auto_constant > 0.0 && self.auto_constant.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "auto constant must be positive, got {}",
                self.auto_constant
            )));
        }
        if let Some(g) = self.beta_norm_guess {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::InvalidInput(format!("beta norm guess must be nonnegative, got {g}")));
            }
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CovarianceKind {
    UnknownCovariance,
    KnownCovariance,
}

impl From<MomentKind> for CovarianceKind {
    fn from(k: MomentKind) -> Self {
        match k {
            MomentKind::SurrogateUnknown => CovarianceKind::UnknownCovariance,
            MomentKind::PopulationKnown => CovarianceKind::KnownCovariance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegressionFit {
    pub beta: Array1<f64>,
    pub lambda_used: f64,
    pub kind: CovarianceKind,
    pub report: SolveReport,
    /// `‖β‖₂` plugged into the automatic λ, when one was used.
    pub beta_norm_used: Option<f64>,
    /// λ of the pilot fit in the two-stage scheme.
    pub lambda_stage1: Option<f64>,
}

/// `log p`, with `log 2` standing in when `p = 1`.
pub(crate) fn log_dim(p: usize) -> f64 {
    (p.max(2) as f64).ln()
}

/// `constant · (σ_x²‖β‖₂ + σ_xσ_ε) · √(log p / (ρ_* n))`.
pub fn auto_lambda(n: usize, p: usize, rho_star: f64, noise: NoiseSpec, beta_norm: f64, constant: f64) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput("n and p must be positive".into()));
    }
    if !(rho_star > 0.0 && rho_star <= 1.0) {
        return Err(Error::InvalidInput(format!("rho_star must lie in (0, 1], got {rho_star}")));
    }
    let sx = noise.sigma_x;
    Ok(constant * (sx * sx * beta_norm + sx * noise.sigma_eps) * (log_dim(p) / (rho_star * n as f64)).sqrt())
}

/// Fits with the configured λ. An automatic λ without a `beta_norm_guess`
/// runs the two-stage scheme of [`fit_auto`].
pub fn fit(moments: &SurrogateMoments, noise: NoiseSpec, cfg: &DantzigConfig) -> Result<RegressionFit> {
    cfg.validate().map_err(|e| e.at(Stage::Dantzig))?;
    match (cfg.lambda, cfg.beta_norm_guess) {
        (Lambda::Fixed(l), _) => {
            let solver = factor(moments)?;
            solve_at(&solver, moments, l, &cfg.solver, None).map(|(beta, report)| RegressionFit {
                beta,
                lambda_used: l,
                kind: moments.kind.into(),
                report,
                beta_norm_used: None,
                lambda_stage1: None,
            })
        }
        (Lambda::Auto, Some(g)) => {
            let l = lambda_for(moments, noise, g, cfg)?;
            let solver = factor(moments)?;
            solve_at(&solver, moments, l, &cfg.solver, None).map(|(beta, report)| RegressionFit {
                beta,
                lambda_used: l,
                kind: moments.kind.into(),
                report,
                beta_norm_used: Some(g),
                lambda_stage1: None,
            })
        }
        (Lambda::Auto, None) => fit_auto(moments, noise, cfg),
    }
}

/// Two-stage plug-in for the unknown `‖β*‖₂` in the λ formula: a pilot fit
/// with a crude scale guess, then a refit with the pilot's norm.
pub fn fit_auto(moments: &SurrogateMoments, noise: NoiseSpec, cfg: &DantzigConfig) -> Result<RegressionFit> {
    cfg.validate().map_err(|e| e.at(Stage::Dantzig))?;
    let guess = match cfg.beta_norm_guess {
        Some(g) => g,
        None => {
            let p = moments.p() as f64;
            let tr = moments.sigma.diag().sum() / p;
            if tr > 0.0 {
                linalg::norm_l2(moments.cross.view()) / tr.sqrt()
            } else {
                0.0
            }
        }
    };
    let solver = factor(moments)?;
    let l1 = lambda_for(moments, noise, guess, cfg)?;
    let (pilot, _) = solve_at(&solver, moments, l1, &cfg.solver, None)?;
    let norm = linalg::norm_l2(pilot.view());
    let l2 = lambda_for(moments, noise, norm, cfg)?;
    let (beta, report) = solve_at(&solver, moments, l2, &cfg.solver, Some(pilot.view()))?;
    Ok(RegressionFit {
        beta,
        lambda_used: l2,
        kind: moments.kind.into(),
        report,
        beta_norm_used: Some(norm),
        lambda_stage1: Some(l1),
    })
}

fn lambda_for(moments: &SurrogateMoments, noise: NoiseSpec, beta_norm: f64, cfg: &DantzigConfig) -> Result<f64> {
    let l = auto_lambda(moments.n, moments.p(), moments.rho_star, noise, beta_norm, cfg.auto_constant)
        .map_err(|e| e.at(Stage::Dantzig))?;
    if l <= 0.0 {
        return Err(Error::InvalidInput(
            "automatic lambda is zero; set sigma_x and sigma_eps or give lambda explicitly".into(),
        )
        .at(Stage::Dantzig));
    }
    Ok(l)
}

fn factor(moments: &SurrogateMoments) -> Result<L1LinfSolver> {
    let p = moments.p();
    if moments.sigma.dim() != (p, p) {
        return Err(Error::DimensionMismatch {
            what: "covariance size",
            expected: p,
            got: moments.sigma.nrows(),
        }
        .at(Stage::Dantzig));
    }
    L1LinfSolver::new(moments.sigma.view()).map_err(|e| e.at(Stage::Dantzig))
}

fn solve_at(
    solver: &L1LinfSolver,
    moments: &SurrogateMoments,
    lambda: f64,
    cfg: &SolverConfig,
    warm: Option<ArrayView1<f64>>,
) -> Result<(Array1<f64>, SolveReport)> {
    let report = solver
        .solve(moments.cross.view(), lambda, cfg, warm)
        .map_err(|e| match e {
            Error::Infeasible(msg) => Error::Infeasible(format!("{msg} (lambda = {lambda:.6e})")),
            e => e,
        })
        .map_err(|e| e.at(Stage::Dantzig))?;
    if !report.converged {
        return Err(Error::NotConverged {
            iterations: report.iterations,
            primal_residual: report.primal_residual,
            dual_residual: report.dual_residual,
        }
        .at(Stage::Dantzig));
    }
    Ok((report.solution.clone(), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::IncompleteDesign;
    use crate::solver::lp_oracle;
    use ndarray::{array, Array2};

    fn moments(sigma: Array2<f64>, cross: Array1<f64>) -> SurrogateMoments {
        SurrogateMoments {
            sigma,
            cross,
            kind: MomentKind::SurrogateUnknown,
            n: 100,
            rho_star: 1.0,
        }
    }

    #[test]
    fn auto_lambda_examples() {
        let noise = NoiseSpec::new(1.0, 1.0).unwrap();
        // log p enters only through √(log p); with p = 3 the value is 2·√(ln 3 / 100)
        let l = auto_lambda(100, 3, 1.0, noise, 1.0, 1.0).unwrap();
        assert!((l / (3f64).ln().sqrt() - 0.2).abs() < 1e-15);
        let z = auto_lambda(100, 10, 1.0, NoiseSpec::new(0.0, 1.0).unwrap(), 0.0, 1.0).unwrap();
        assert_eq!(z, 0.0);
        let a = auto_lambda(100, 10, 0.8, noise, 1.0, 1.0).unwrap();
        let b = auto_lambda(100, 10, 0.4, noise, 1.0, 1.0).unwrap();
        assert!((b / a - 2f64.sqrt()).abs() < 1e-12);
        let p1 = auto_lambda(100, 1, 1.0, noise, 1.0, 1.0).unwrap();
        let p2 = auto_lambda(100, 2, 1.0, noise, 1.0, 1.0).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn zero_cross_gives_zero() {
        let m = moments(array![[2.0, 0.3], [0.3, 1.0]], array![0.0, 0.0]);
        let f = fit(&m, NoiseSpec::new(0.1, 1.0).unwrap(), &DantzigConfig::fixed(0.1)).unwrap();
        assert!(f.beta.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn dense_instance_matches_lp() {
        let s = array![[1.5, 0.4, -0.2], [0.4, 1.0, 0.3], [-0.2, 0.3, 0.8]];
        let c = array![0.9, -0.5, 0.7];
        let m = moments(s.clone(), c.clone());
        let f = fit(&m, NoiseSpec::new(0.1, 1.0).unwrap(), &DantzigConfig::fixed(0.05)).unwrap();
        let lp = lp_oracle(s.view(), c.view(), 0.05).unwrap();
        let diff = (&f.beta - &lp).mapv(f64::abs).fold(0.0f64, |a, b| a.max(*b));
        assert!(diff < 1e-6, "{f:?} vs {lp}");
    }

    #[test]
    fn infeasible_is_labelled() {
        // indefinite surrogate with a tiny lambda
        let m = moments(array![[1.0, 0.0], [0.0, 0.0]], array![0.0, 1.0]);
        let err = fit(&m, NoiseSpec::new(0.1, 1.0).unwrap(), &DantzigConfig::fixed(0.01)).unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Dantzig));
        assert!(matches!(err.root(), Error::Infeasible(_)));
    }

    #[test]
    fn two_stage_records_both_lambdas() {
        let x = array![[1.0, 0.2], [0.5, -1.0], [-1.2, 0.3], [0.7, 0.9]];
        let d = IncompleteDesign::fully_observed(x.view()).unwrap();
        let y = x.dot(&array![1.0, 0.0]);
        let m = SurrogateMoments::from_design(&d, y.view()).unwrap();
        let f = fit(&m, NoiseSpec::new(0.1, 1.0).unwrap(), &DantzigConfig::default()).unwrap();
        assert!(f.lambda_stage1.is_some() && f.beta_norm_used.is_some());
        let resid = &m.cross - &m.sigma.dot(&f.beta);
        assert!(linalg::norm_inf(resid.view()) <= f.lambda_used + 1e-6);
    }

    #[test]
    fn pilot_zero_gives_noise_only_lambda() {
        let m = moments(Array2::eye(2), array![0.0, 0.0]);
        let noise = NoiseSpec::new(0.1, 1.0).unwrap();
        let f = fit_auto(&m, noise, &DantzigConfig::default()).unwrap();
        assert_eq!(f.beta_norm_used, Some(0.0));
        let expect = auto_lambda(100, 2, 1.0, noise, 0.0, 1.0).unwrap();
        assert_eq!(f.lambda_used, expect);
    }
}
