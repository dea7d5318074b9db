use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use ndarray::Array1;
use serde::{Deserialize, Serialize};

use missreg::design::sigma_x_heuristic;
use missreg::inference::infer_from_beta;
use missreg::io;
use missreg::simulation::{
    random_coordinates, run_coverage, run_normality, run_rate_sweep, RunSettings, SyntheticModel, TableRow, Tuning,
    FULL_GRID,
};
use missreg::theory;
use missreg::{
    dantzig, fit_clime, ClimeConfig, DantzigConfig, Error, IncompleteDesign, InferenceOptions,
    Lambda, NoiseSpec, Nu, Result, SampleInfo, SolverConfig, Stage, SurrogateMoments,
};

use crate::meta::Meta;
use crate::{Format, Global};

/// `auto` or a number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AutoOr {
    Auto,
    Value(f64),
}

impl FromStr for AutoOr {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(AutoOr::Auto);
        }
        s.parse::<f64>()
            .map(AutoOr::Value)
            .map_err(|_| format!("expected `auto` or a number, got {s:?}"))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Data {
    /// CSV with a header row; missing cells are `NA`.
    #[arg(long)]
    input: PathBuf,
    /// One-line CSV of per-column observation rates (estimated if absent).
    #[arg(long)]
    rates: Option<PathBuf>,
    /// Design scale σ_x for the automatic tuning parameters.
    #[arg(long, default_value = "auto")]
    sigma_x: AutoOr,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Solver {
    /// ADMM stopping tolerance (primal and dual).
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
}

impl Solver {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            tol_primal: self.tol,
            tol_dual: self.tol,
            max_iters: self.max_iters,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Regression {
    /// Name of the response column.
    #[arg(long)]
    response: String,
    /// Dantzig tuning parameter.
    #[arg(long, default_value = "auto")]
    lambda: AutoOr,
    #[arg(long, default_value_t = Tuning::default().lambda_constant)]
    lambda_constant: f64,
    /// Noise level σ_ε (needed by the automatic λ and the variance).
    #[arg(long)]
    sigma_eps: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Precision {
    /// CLIME tuning parameter.
    #[arg(long, default_value = "auto")]
    nu: AutoOr,
    #[arg(long, default_value_t = Tuning::default().nu_constant)]
    nu_constant: f64,
    /// Guess for the ℓ1 operator norm of the precision matrix.
    #[arg(long, default_value_t = Tuning::default().b1)]
    b1: f64,
    /// Symmetrize the estimate (solves every column).
    #[arg(long)]
    symmetrize: bool,
}

impl Precision {
    fn config(&self, solver: SolverConfig) -> ClimeConfig {
        ClimeConfig {
            nu: match self.nu {
                AutoOr::Auto => Nu::Auto,
                AutoOr::Value(v) => Nu::Fixed(v),
            },
            auto_constant: self.nu_constant,
            b1_guess: self.b1,
            symmetrize: self.symmetrize,
            solver,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    data: Data,
    #[command(flatten)]
    reg: Regression,
    /// Plug this ‖β‖₂ into the automatic λ instead of the two-stage estimate.
    #[arg(long)]
    beta_norm: Option<f64>,
    /// Known population covariance (CSV); replaces the surrogate covariance.
    #[arg(long)]
    known_sigma: Option<PathBuf>,
    #[command(flatten)]
    solver: Solver,
    /// Also write β̂ as `name,value` CSV here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PrecisionArgs {
    #[command(flatten)]
    data: Data,
    /// Column to drop before estimating (e.g. the response).
    #[arg(long)]
    response: Option<String>,
    #[command(flatten)]
    prec: Precision,
    #[command(flatten)]
    solver: Solver,
    /// Write the estimate here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CiArgs {
    #[command(flatten)]
    data: Data,
    #[command(flatten)]
    reg: Regression,
    #[command(flatten)]
    prec: Precision,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// 0-based coordinates (comma separated); all when omitted.
    #[arg(long, value_delimiter = ',')]
    coords: Vec<usize>,
    /// Use the residual-based σ_ε in the variance.
    #[arg(long)]
    plugin_sigma_eps: bool,
    /// Skip the fit and use β̂ from a `fit` output (CSV or JSON).
    #[arg(long)]
    beta_from: Option<PathBuf>,
    #[command(flatten)]
    solver: Solver,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Run the full-scale grid instead of the configured size.
    #[arg(long)]
    full: bool,
    /// Directory for report.json and the CSV table / samples.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    /// Pair whose likelihoods differ only when two coupled coordinates are both observed.
    Coupled,
    /// Sparse packing set with separated tails.
    Packing,
    /// Identity-covariance pair: exact KL against its closed-form bound.
    Identity,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KlArgs {
    #[arg(long, value_enum, default_value_t = Construction::Coupled)]
    construction: Construction,
    #[arg(long, default_value_t = 8)]
    p: usize,
    #[arg(long, default_value_t = 4)]
    s: usize,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// ‖β‖₂ of the hypotheses.
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_eps: f64,
    /// 0-based perturbed coordinate (default p − 1).
    #[arg(long)]
    j: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Packing perturbation δ.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 100)]
    max_members: usize,
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(Error::Io)
        }
    }
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("report serializes");
    b.push(b'\n');
    b
}

struct Loaded {
    design: IncompleteDesign,
    names: Vec<String>,
    y: Option<Array1<f64>>,
    sigma_x: f64,
}

fn load(data: &Data, response: Option<&str>) -> Result<Loaded> {
    let ds = io::read_dataset_path(&data.input, response)?;
    let rates = data.rates.as_deref().map(io::read_rates_path).transpose()?;
    let design = IncompleteDesign::from_raw(&ds.rows, rates.as_deref()).map_err(|e| e.at(Stage::Design))?;
    let sigma_x = match data.sigma_x {
        AutoOr::Auto => sigma_x_heuristic(&design),
        AutoOr::Value(v) => v,
    };
    Ok(Loaded { design, names: ds.names, y: ds.response, sigma_x })
}

fn dantzig_config(reg: &Regression, beta_norm: Option<f64>, solver: SolverConfig) -> DantzigConfig {
    DantzigConfig {
        lambda: match reg.lambda {
            AutoOr::Auto => Lambda::Auto,
            AutoOr::Value(v) => Lambda::Fixed(v),
        },
        auto_constant: reg.lambda_constant,
        beta_norm_guess: beta_norm,
        solver,
    }
}

fn noise(reg: &Regression, sigma_x: f64) -> Result<NoiseSpec> {
    let sigma_eps = match (reg.sigma_eps, reg.lambda) {
        (Some(s), _) => s,
        (None, AutoOr::Value(_)) => 0.0,
        (None, AutoOr::Auto) => {
            return Err(Error::InvalidInput(
                "the automatic lambda needs --sigma-eps (or give --lambda explicitly)".into(),
            ))
        }
    };
    NoiseSpec::new(sigma_eps, sigma_x)
}

#[derive(Serialize)]
struct FitDiagnostics {
    n: usize,
    p: usize,
    rho_star: f64,
    rates_estimated: bool,
    covariance: dantzig::CovarianceKind,
    lambda_stage1: Option<f64>,
    beta_norm_used: Option<f64>,
    sigma_x_used: f64,
    iterations: usize,
    converged: bool,
    polished: bool,
    duality_gap: Option<f64>,
    max_violation: f64,
    objective: f64,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    meta: Meta,
    names: &'a [String],
    beta: Vec<f64>,
    lambda_used: f64,
    diagnostics: FitDiagnostics,
}

pub fn fit(g: &Global, a: &FitArgs) -> Result<()> {
    let meta = Meta::new(g.seed, &(a, "fit"));
    let d = load(&a.data, Some(&a.reg.response))?;
    let y = d.y.expect("response requested");
    let noise = noise(&a.reg, d.sigma_x)?;
    let moments = match &a.known_sigma {
        Some(path) => {
            let s0 = io::read_matrix_path(path)?;
            SurrogateMoments::with_population(&d.design, y.view(), s0.view())
        }
        None => SurrogateMoments::from_design(&d.design, y.view()),
    }
    .map_err(|e| e.at(Stage::Design))?;
    let fit = dantzig::fit(&moments, noise, &dantzig_config(&a.reg, a.beta_norm, a.solver.config()))?;

    if let Some(path) = &a.output {
        let mut buf = meta.csv_comment().into_bytes();
        io::write_named_vector(&mut buf, &d.names, fit.beta.view())?;
        write_out(Some(path), &buf)?;
    }
    match g.format.unwrap_or(Format::Json) {
        Format::Json => {
            let out = FitOutput {
                names: &d.names,
                beta: fit.beta.to_vec(),
                lambda_used: fit.lambda_used,
                diagnostics: FitDiagnostics {
                    n: d.design.n(),
                    p: d.design.p(),
                    rho_star: d.design.rho_star(),
                    rates_estimated: d.design.rates_estimated(),
                    covariance: fit.kind,
                    lambda_stage1: fit.lambda_stage1,
                    beta_norm_used: fit.beta_norm_used,
                    sigma_x_used: d.sigma_x,
                    iterations: fit.report.iterations,
                    converged: fit.report.converged,
                    polished: fit.report.polished,
                    duality_gap: fit.report.duality_gap,
                    max_violation: fit.report.max_violation,
                    objective: fit.report.objective,
                },
                meta,
            };
            write_out(None, &json_bytes(&out))
        }
        Format::Csv => {
            let mut buf = meta.csv_comment().into_bytes();
            io::write_named_vector(&mut buf, &d.names, fit.beta.view())?;
            write_out(None, &buf)
        }
    }
}

#[derive(Serialize)]
struct PrecisionOutput<'a> {
    meta: Meta,
    names: &'a [String],
    nu_used: f64,
    symmetrized: bool,
    theta: Vec<Vec<f64>>,
}

pub fn precision(g: &Global, a: &PrecisionArgs) -> Result<()> {
    let meta = Meta::new(g.seed, &(a, "precision"));
    let d = load(&a.data, a.response.as_deref())?;
    let sigma = d.design.surrogate_covariance();
    let sample = SampleInfo {
        n: d.design.n(),
        rho_star: d.design.rho_star(),
        sigma_x: d.sigma_x,
    };
    let fit = fit_clime(sigma.view(), &a.prec.config(a.solver.config()), Some(sample))?;
    let bytes = match g.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = meta.csv_comment().into_bytes();
            io::write_matrix(&mut buf, &d.names, fit.theta.view())?;
            buf
        }
        Format::Json => json_bytes(&PrecisionOutput {
            meta,
            names: &d.names,
            nu_used: fit.nu_used,
            symmetrized: fit.symmetrized,
            theta: fit.theta.rows().into_iter().map(|r| r.to_vec()).collect(),
        }),
    };
    write_out(a.output.as_deref(), &bytes)
}

/// β̂ from a `fit` output: `name,value` CSV or the JSON report.
fn read_beta(path: &Path) -> Result<Array1<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        #[derive(Deserialize)]
        struct J {
            beta: Vec<f64>,
        }
        let j: J = serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        Ok(Array1::from(j.beta))
    } else {
        Ok(io::read_named_vector(text.as_bytes())?.1)
    }
}

#[derive(Serialize)]
struct CiRow {
    coord: usize,
    name: String,
    beta_hat: f64,
    beta_debiased: f64,
    lower: f64,
    upper: f64,
    var: f64,
}

#[derive(Serialize)]
struct CiOutput {
    meta: Meta,
    alpha: f64,
    n: usize,
    lambda_used: Option<f64>,
    lambda_stage1: Option<f64>,
    nu_used: f64,
    sigma_eps_used: f64,
    sigma_x_used: f64,
    rates_estimated: bool,
    intervals: Vec<CiRow>,
}

pub fn ci(g: &Global, a: &CiArgs) -> Result<()> {
    let meta = Meta::new(g.seed, &(a, "ci"));
    let d = load(&a.data, Some(&a.reg.response))?;
    let y = d.y.expect("response requested");
    let noise = noise(&a.reg, d.sigma_x)?;
    let moments = SurrogateMoments::from_design(&d.design, y.view()).map_err(|e| e.at(Stage::Design))?;
    let (beta, lambda_used, lambda_stage1) = match &a.beta_from {
        Some(path) => (read_beta(path)?, None, None),
        None => {
            let f = dantzig::fit(&moments, noise, &dantzig_config(&a.reg, None, a.solver.config()))?;
            (f.beta, Some(f.lambda_used), f.lambda_stage1)
        }
    };
    let opts = InferenceOptions { alpha: a.alpha, plugin_sigma_eps: a.plugin_sigma_eps };
    let res = infer_from_beta(
        &d.design,
        y.view(),
        &moments,
        beta.view(),
        noise,
        &a.prec.config(a.solver.config()),
        &a.coords,
        &opts,
    )?;
    let rows: Vec<CiRow> = res
        .coords
        .iter()
        .enumerate()
        .map(|(k, &j)| CiRow {
            coord: j,
            name: d.names[j].clone(),
            beta_hat: res.beta_hat[j],
            beta_debiased: res.beta_debiased[j],
            lower: res.intervals[k].0,
            upper: res.intervals[k].1,
            var: res.var_diag[k],
        })
        .collect();
    let bytes = match g.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = meta.csv_comment().into_bytes();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record(["coord", "name", "beta_hat", "beta_debiased", "lower", "upper", "var"]).map_err(Error::Csv)?;
                for r in &rows {
                    w.write_record([
                        r.coord.to_string(),
                        r.name.clone(),
                        format!("{:?}", r.beta_hat),
                        format!("{:?}", r.beta_debiased),
                        format!("{:?}", r.lower),
                        format!("{:?}", r.upper),
                        format!("{:?}", r.var),
                    ])
                    .map_err(Error::Csv)?;
                }
                w.flush().map_err(Error::Io)?;
            }
            buf
        }
        Format::Json => json_bytes(&CiOutput {
            meta,
            alpha: res.alpha,
            n: res.n,
            lambda_used,
            lambda_stage1,
            nu_used: res.nu_used,
            sigma_eps_used: res.sigma_eps_used,
            sigma_x_used: res.sigma_x_used,
            rates_estimated: res.rates_estimated,
            intervals: rows,
        }),
    };
    write_out(a.output.as_deref(), &bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[default]
    Coverage,
    Normality,
    RateSweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Surrogate (unknown) covariance.
    #[default]
    Unknown,
    /// Population covariance supplied.
    Known,
    /// Both, for the rate sweep.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    pub redraw_beta: bool,
}

fn default_s() -> usize {
    10
}
fn default_sigma_eps() -> f64 {
    0.1
}
fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    #[serde(default = "default_s")]
    pub s: usize,
    pub rho: f64,
    #[serde(default = "default_sigma_eps")]
    pub sigma_eps: f64,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Overrides `--seed`.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default)]
    pub tuning: Tuning,
    /// Rate grid of the sweep.
    #[serde(default)]
    pub rho_grid: Option<Vec<f64>>,
    /// Coordinates of the normality diagnostic (random in/out of the support
    /// when absent).
    #[serde(default)]
    pub coords: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct SimOutput<T: Serialize> {
    meta: Meta,
    config: ExperimentConfig,
    full: bool,
    report: T,
}

fn save(dir: Option<&Path>, name: &str, bytes: &[u8]) -> Result<()> {
    if let Some(d) = dir {
        fs::create_dir_all(d).map_err(|e| Error::InvalidInput(format!("cannot create {}: {e}", d.display())))?;
        write_out(Some(&d.join(name)), bytes)?;
    }
    Ok(())
}

pub fn simulate(g: &Global, a: &SimulateArgs) -> Result<()> {
    let text = fs::read_to_string(&a.config)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", a.config.display())))?;
    let cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", a.config.display())))?;
    let seed = cfg.seed.unwrap_or(g.seed);
    let meta = Meta::new(seed, &(&cfg, a.full, "simulate"));
    let settings = RunSettings { tuning: cfg.tuning, redraw_beta: cfg.flags.redraw_beta, workers: g.workers };
    let dir = a.out_dir.as_deref();
    let format = g.format.unwrap_or(Format::Json);
    let sim = |e: Error| e.at(Stage::Simulation);

    match cfg.experiment {
        Experiment::Coverage => {
            let known = cfg.estimator == Estimator::Known;
            if known {
                return Err(Error::InvalidInput("coverage experiments use the unknown-covariance estimator".into()));
            }
            let grid: Vec<(usize, usize, f64)> = if a.full { FULL_GRID.to_vec() } else { vec![(cfg.n, cfg.p, cfg.rho)] };
            let t = if a.full { cfg.t.max(1000) } else { cfg.t };
            let mut reports = Vec::with_capacity(grid.len());
            let mut table = meta.csv_comment();
            table.push_str(TableRow::CSV_HEADER);
            table.push('\n');
            for &(n, p, rho) in &grid {
                let model = SyntheticModel::banded(p, cfg.s, rho, cfg.sigma_eps, seed).map_err(sim)?;
                let rep = run_coverage(&model, n, t, cfg.alpha, seed, &settings).map_err(sim)?;
                table.push_str(&rep.table.csv_line(n, p, rho));
                table.push('\n');
                reports.push(rep);
            }
            let json = json_bytes(&SimOutput { meta, config: cfg, full: a.full, report: &reports });
            save(dir, "report.json", &json)?;
            save(dir, "table.csv", table.as_bytes())?;
            match format {
                Format::Json => write_out(None, &json),
                Format::Csv => write_out(None, table.as_bytes()),
            }
        }
        Experiment::Normality => {
            let model = SyntheticModel::banded(cfg.p, cfg.s, cfg.rho, cfg.sigma_eps, seed).map_err(sim)?;
            let coords = match &cfg.coords {
                Some(c) => c.clone(),
                None => {
                    let (i, o) = random_coordinates(&model, seed);
                    i.into_iter().chain(o).collect()
                }
            };
            let rep = run_normality(&model, cfg.n, cfg.t, &coords, seed, &settings).map_err(sim)?;
            let mut samples = meta.csv_comment();
            samples.push_str(&rep.coords.iter().map(|c| format!("delta_{c}")).collect::<Vec<_>>().join(","));
            samples.push('\n');
            let len = rep.samples.first().map_or(0, |s| s.len());
            for i in 0..len {
                let line: Vec<String> = rep.samples.iter().map(|s| format!("{:?}", s[i])).collect();
                samples.push_str(&line.join(","));
                samples.push('\n');
            }
            let json = json_bytes(&SimOutput { meta, config: cfg, full: a.full, report: &rep });
            save(dir, "report.json", &json)?;
            save(dir, "samples.csv", samples.as_bytes())?;
            match format {
                Format::Json => write_out(None, &json),
                Format::Csv => write_out(None, samples.as_bytes()),
            }
        }
        Experiment::RateSweep => {
            let grid = cfg.rho_grid.clone().unwrap_or_else(|| vec![0.5, 0.6, 0.7, 0.8, 0.9]);
            let model = SyntheticModel::banded(cfg.p, cfg.s, cfg.rho, cfg.sigma_eps, seed).map_err(sim)?;
            let which: Vec<bool> = match cfg.estimator {
                Estimator::Unknown => vec![false],
                Estimator::Known => vec![true],
                Estimator::Both => vec![true, false],
            };
            let mut reports = Vec::new();
            let mut table = meta.csv_comment();
            table.push_str("known_sigma,rho,median_error,failures\n");
            for known in which {
                let rep = run_rate_sweep(&model, cfg.n, &grid, cfg.t, seed, known, &settings).map_err(sim)?;
                for (k, r) in rep.rho_grid.iter().enumerate() {
                    table.push_str(&format!("{known},{r},{:?},{}\n", rep.median_error[k], rep.failures[k]));
                }
                reports.push(rep);
            }
            let json = json_bytes(&SimOutput { meta, config: cfg, full: a.full, report: &reports });
            save(dir, "report.json", &json)?;
            save(dir, "table.csv", table.as_bytes())?;
            match format {
                Format::Json => write_out(None, &json),
                Format::Csv => write_out(None, table.as_bytes()),
            }
        }
    }
}

#[derive(Serialize)]
struct RhoScaling {
    rho: Vec<f64>,
    kl: Vec<f64>,
    slope: f64,
}

#[derive(Serialize)]
struct CoupledReport {
    meta: Meta,
    construction: Construction,
    p: usize,
    s: usize,
    gamma: f64,
    rho: f64,
    j: usize,
    beta0: Vec<f64>,
    beta1: Vec<f64>,
    equivalence: theory::EquivalenceReport,
    kl_exact: Option<f64>,
    kl_montecarlo: Option<theory::McEstimate>,
    rho_scaling: Option<RhoScaling>,
    passed: bool,
}

#[derive(Serialize)]
struct IdentityReport {
    meta: Meta,
    construction: Construction,
    beta0: Vec<f64>,
    beta1: Vec<f64>,
    rho: f64,
    kl_exact: f64,
    kl_bound: f64,
    kl_montecarlo: theory::McEstimate,
    within_3_se: bool,
}

#[derive(Serialize)]
struct PackingReport {
    meta: Meta,
    construction: Construction,
    members: usize,
    min_pairwise_distance: f64,
    required_distance: f64,
    max_norm_error: f64,
    passed: bool,
    betas: Vec<Vec<f64>>,
}

fn th(e: Error) -> Error {
    e.at(Stage::Theory)
}

pub fn kl_verify(g: &Global, a: &KlArgs) -> Result<()> {
    let meta = Meta::new(g.seed, &(a, "kl-verify"));
    match a.construction {
        Construction::Coupled => {
            let j = a.j.unwrap_or(a.p.saturating_sub(1));
            let pair = theory::coupled_pair(a.p, a.s, a.m, a.gamma, j, a.sigma_eps, a.rho).map_err(th)?;
            let k = a.s - 2;
            let eq = theory::check_likelihood_equivalence(&pair, k, j, a.trials, g.seed).map_err(th)?;
            let exact = (a.p <= theory::MAX_ENUMERATION_DIM).then(|| theory::kl_exact(&pair.0, &pair.1)).transpose().map_err(th)?;
            let mc = (a.rho > 0.0 && a.trials >= theory::MIN_MC_SAMPLES)
                .then(|| theory::kl_montecarlo(&pair.0, &pair.1, a.trials, g.seed))
                .transpose()
                .map_err(th)?;
            let scaling = if a.p <= 12 {
                let rho = vec![0.1, 0.2, 0.3, 0.4, 0.5];
                let mut kl = Vec::new();
                for &r in &rho {
                    let (h0, h1) = theory::coupled_pair(a.p, a.s, a.m, a.gamma, j, a.sigma_eps, r).map_err(th)?;
                    kl.push(theory::kl_exact(&h0, &h1).map_err(th)?);
                }
                let lx: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
                let ly: Vec<f64> = kl.iter().map(|v| v.ln()).collect();
                let slope = missreg::simulation::ls_slope(&lx, &ly);
                Some(RhoScaling { rho, kl, slope })
            } else {
                None
            };
            let passed = eq.passed;
            let failure = (!passed).then(|| {
                format!(
                    "likelihood equivalence violated in {} draws (first mask {})",
                    eq.violations,
                    eq.counterexample.clone().unwrap_or_default()
                )
            });
            let rep = CoupledReport {
                meta,
                construction: a.construction,
                p: a.p,
                s: a.s,
                gamma: a.gamma,
                rho: a.rho,
                j,
                beta0: pair.0.beta.to_vec(),
                beta1: pair.1.beta.to_vec(),
                equivalence: eq,
                kl_exact: exact,
                kl_montecarlo: mc,
                rho_scaling: scaling,
                passed,
            };
            write_out(None, &json_bytes(&rep))?;
            match failure {
                Some(msg) => Err(Error::CheckFailed(msg).at(Stage::Theory)),
                None => Ok(()),
            }
        }
        Construction::Identity => {
            // β₀ spread evenly at norm m; β₁ moves one coordinate by γ
            let b0 = Array1::from_elem(a.p, a.m / (a.p as f64).sqrt());
            let mut b1 = b0.clone();
            b1[a.j.unwrap_or(0).min(a.p.saturating_sub(1))] += a.gamma;
            let exact = theory::kl_identity_covariance(b0.view(), b1.view(), a.sigma_eps, a.rho).map_err(th)?;
            let bound = theory::kl_identity_bound(b0.view(), b1.view(), a.sigma_eps, a.rho).map_err(th)?;
            let h0 = theory::Hypothesis::identity(b0.clone(), a.sigma_eps, a.rho).map_err(th)?;
            let h1 = theory::Hypothesis::identity(b1.clone(), a.sigma_eps, a.rho).map_err(th)?;
            let mc = theory::kl_montecarlo(&h0, &h1, a.trials, g.seed).map_err(th)?;
            let rep = IdentityReport {
                meta,
                construction: a.construction,
                beta0: b0.to_vec(),
                beta1: b1.to_vec(),
                rho: a.rho,
                kl_exact: exact,
                kl_bound: bound,
                within_3_se: (mc.estimate - exact).abs() <= 3.0 * mc.stderr,
                kl_montecarlo: mc,
            };
            write_out(None, &json_bytes(&rep))
        }
        Construction::Packing => {
            let set = theory::packing_hypotheses(a.p, a.s, a.m, a.delta, a.max_members, g.seed).map_err(th)?;
            let mut min_d = f64::INFINITY;
            for (i, b) in set.iter().enumerate() {
                for c in &set[..i] {
                    min_d = min_d.min(missreg::linalg::norm_l2((b - c).view()));
                }
            }
            let required = (a.s as f64 / 4.0).sqrt() * a.delta;
            let norm_err = set
                .iter()
                .map(|b| (missreg::linalg::norm_l2(b.view()) - a.m).abs())
                .fold(0.0, f64::max);
            let rep = PackingReport {
                meta,
                construction: a.construction,
                members: set.len(),
                min_pairwise_distance: min_d,
                required_distance: required,
                max_norm_error: norm_err,
                passed: min_d >= required - 1e-12 && norm_err <= 1e-12,
                betas: set.iter().map(|b| b.to_vec()).collect(),
            };
            write_out(None, &json_bytes(&rep))
        }
    }
}
