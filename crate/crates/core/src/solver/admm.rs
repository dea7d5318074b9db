//! ADMM for `minimize ‖x‖₁ subject to ‖A x − b‖_∞ ≤ λ`.
//!
//! The problem is split as
//!
//! ```text
//! minimize ‖w‖₁ + I_box(z)   subject to   A x = z,  x = w
//! ```
//!
//! where `box = [b − λ, b + λ]`. With a single penalty on both constraint
//! blocks the `x`-update is the regularized least-squares step
//! `(AᵀA + I) x = Aᵀ(z − u) + (w − v)`, whose matrix does not depend on the
//! penalty, so the inverse is computed once per `A` and reused across
//! right-hand sides, `λ` values and penalty adaptations. The `z`-update is a
//! projection onto the box and the `w`-update is a soft-threshold.
//!
//! Many right-hand sides sharing one `A` (the columns of a CLIME problem) are
//! iterated together as matrix blocks; each column keeps its own penalty and
//! leaves the block as soon as it converges.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::linalg::{self, Cholesky};

const CHECK_EVERY: usize = 10;
const INFEASIBILITY_TOL: f64 = 1e-6;
/// Iterations between attempts to certify optimality of a polished vertex.
const CERTIFY_EVERY: usize = 50;
/// First penalty rebalancing. Early residual balancing drags a large penalty
/// down before the active set settles, which stalls the certificate.
const ADAPT_START: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// ADMM penalty (initial value when `adaptive_penalty` is set).
    pub penalty: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iters: usize,
    /// Over-relaxation factor in `[1.0, 1.8]`.
    pub over_relaxation: f64,
    /// Rebalance the penalty from the primal/dual residual ratio.
    pub adaptive_penalty: bool,
    /// Refine a converged iterate to the vertex given by its support and
    /// active constraints, when that vertex is feasible and no worse.
    pub polish: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            penalty: 100.0,
            tol_primal: 1e-7,
            tol_dual: 1e-7,
            max_iters: 20_000,
            over_relaxation: 1.5,
            adaptive_penalty: true,
            polish: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.penalty > 0.0
            && self.tol_primal > 0.0
            && self.tol_dual > 0.0
            && self.max_iters > 0
            && (1.0..=1.8).contains(&self.over_relaxation);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("solver configuration out of range: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub solution: Array1<f64>,
    pub iterations: usize,
    /// Primal residual relative to `1 + scale` of the iterates.
    pub primal_residual: f64,
    /// Dual residual relative to `1 + scale` of the dual iterates.
    pub dual_residual: f64,
    pub converged: bool,
    /// `‖solution‖₁`.
    pub objective: f64,
    /// Whether the returned solution came from the polishing step.
    pub polished: bool,
    /// `max(0, ‖A·solution − b‖_∞ − λ)`.
    pub max_violation: f64,
    /// Relative gap `(‖x‖₁ − lower bound) / (1 + ‖x‖₁)` proven by a dual
    /// feasible point, when one was found.
    pub duality_gap: Option<f64>,
}

/// An `A` matrix with the cached inverse of `AᵀA + I`.
#[derive(Debug, Clone)]
pub struct L1LinfSolver {
    a: Array2<f64>,
    /// `A / scale`, the matrix the iterations actually run on.
    scaled: Array2<f64>,
    scale: f64,
    m_inv: Array2<f64>,
}

/// Solves a single instance; see [`L1LinfSolver`] to reuse the factorization.
pub fn solve_l1_linf(a: ArrayView2<f64>, b: ArrayView1<f64>, lambda: f64, cfg: &SolverConfig) -> Result<SolveReport> {
    L1LinfSolver::new(a)?.solve(b, lambda, cfg, None)
}

impl L1LinfSolver {
    pub fn new(a: ArrayView2<f64>) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("constraint matrix has non-finite entries".into()));
        }
        let m = a.ncols();
        // iterate on a unit-magnitude copy so that tolerances are scale-free
        let scale = match linalg::max_abs(a) {
            s if s > 0.0 => s,
            _ => 1.0,
        };
        let scaled = a.mapv(|v| v / scale);
        let mut gram = scaled.t().dot(&scaled);
        for i in 0..m {
            gram[[i, i]] += 1.0;
        }
        let ch = Cholesky::new(gram.view())?;
        Ok(L1LinfSolver {
            a: a.to_owned(),
            scaled,
            scale,
            m_inv: ch.inverse(),
        })
    }

    pub fn a(&self) -> ArrayView2<'_, f64> {
        self.a.view()
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn solve(
        &self,
        b: ArrayView1<f64>,
        lambda: f64,
        cfg: &SolverConfig,
        warm: Option<ArrayView1<f64>>,
    ) -> Result<SolveReport> {
        let rhs = b.insert_axis(Axis(1));
        let warm = warm.map(|w| w.insert_axis(Axis(1)));
        self.solve_batch(rhs, lambda, cfg, warm)?
            .pop()
            .expect("one column in, one report out")
    }

    /// Solves one problem per column of `rhs`; results are in column order.
    pub fn solve_batch(
        &self,
        rhs: ArrayView2<f64>,
        lambda: f64,
        cfg: &SolverConfig,
        warm: Option<ArrayView2<f64>>,
    ) -> Result<Vec<Result<SolveReport>>> {
        cfg.validate()?;
        let (k, m) = self.a.dim();
        check_len("right-hand side rows", k, rhs.nrows())?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be finite and nonnegative, got {lambda}")));
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("right-hand side has non-finite entries".into()));
        }
        let total = rhs.ncols();
        let mut out: Vec<Option<Result<SolveReport>>> = (0..total).map(|_| None).collect();
        if total == 0 {
            return Ok(Vec::new());
        }

        let a = &self.scaled;
        let at = self.scaled.t();
        let alpha = cfg.over_relaxation;

        let mut st = BlockState::start(self, rhs, lambda, warm, cfg.penalty)?;
        let mut iter = 0usize;
        let mut next_adapt = ADAPT_START;
        while iter < cfg.max_iters && st.width() > 0 {
            iter += 1;
            let check = iter % CHECK_EVERY == 0 || iter == cfg.max_iters;

            // x-update
            let zu = &st.z - &st.u;
            let mut r = at.dot(&zu);
            r += &st.w;
            r -= &st.v;
            st.x = self.m_inv.dot(&r);
            let ax = a.dot(&st.x);

            let z_prev = if check { Some(st.z.clone()) } else { None };
            let w_prev = if check { Some(st.w.clone()) } else { None };

            // z-update: relaxed point projected onto the box
            let na = st.width();
            {
                let zs = st.z.as_slice_mut().unwrap();
                let us = st.u.as_slice_mut().unwrap();
                let axs = ax.as_slice().unwrap();
                let lo = st.lo.as_slice().unwrap();
                let hi = st.hi.as_slice().unwrap();
                for i in 0..zs.len() {
                    let axh = alpha * axs[i] + (1.0 - alpha) * zs[i];
                    let znew = (axh + us[i]).clamp(lo[i], hi[i]);
                    us[i] += axh - znew;
                    zs[i] = znew;
                }
            }
            // w-update: soft-threshold at 1/penalty
            {
                let ws = st.w.as_slice_mut().unwrap();
                let vs = st.v.as_slice_mut().unwrap();
                let xs = st.x.as_slice().unwrap();
                for i in 0..ws.len() {
                    let col = i % na;
                    let t = 1.0 / st.rho[col];
                    let xh = alpha * xs[i] + (1.0 - alpha) * ws[i];
                    let wnew = linalg::soft_threshold(xh + vs[i], t);
                    vs[i] += xh - wnew;
                    ws[i] = wnew;
                }
            }

            if !check {
                continue;
            }
            // penalty changes on a doubling schedule so that it is eventually fixed
            let adapt_now = iter >= next_adapt;
            if adapt_now {
                next_adapt *= 2;
            }
            let z_prev = z_prev.unwrap();
            let w_prev = w_prev.unwrap();
            let mut dual = at.dot(&(&st.z - &z_prev));
            dual += &st.w;
            dual -= &w_prev;
            let mut dual_scale = at.dot(&st.u);
            dual_scale += &st.v;

            let mut finished: Vec<(usize, ColumnStatus)> = Vec::new();
            let certify_now = cfg.polish && iter >= CERTIFY_EVERY && iter % CERTIFY_EVERY == 0;
            let du = &st.u - &st.u_check;
            let du_needed = (0..na).any(|c| du.column(c).iter().any(|v| v.abs() > 1e-12));
            let atdu = if du_needed && iter >= 5 * CHECK_EVERY { Some(at.dot(&du)) } else { None };

            for c in 0..na {
                let rho = st.rho[c];
                let mut r_pri = 0.0f64;
                let mut s_pri = 0.0f64;
                for i in 0..k {
                    r_pri = r_pri.max((ax[[i, c]] - st.z[[i, c]]).abs());
                    s_pri = s_pri.max(ax[[i, c]].abs()).max(st.z[[i, c]].abs());
                }
                for j in 0..m {
                    r_pri = r_pri.max((st.x[[j, c]] - st.w[[j, c]]).abs());
                    s_pri = s_pri.max(st.x[[j, c]].abs()).max(st.w[[j, c]].abs());
                }
                let r_dual = rho * dual.column(c).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                let s_dual = rho * dual_scale.column(c).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                let pri_rel = r_pri / (1.0 + s_pri);
                let dual_rel = r_dual / (1.0 + s_dual);
                st.last_pri[c] = pri_rel;
                st.last_dual[c] = dual_rel;

                if pri_rel <= cfg.tol_primal && dual_rel <= cfg.tol_dual {
                    finished.push((c, ColumnStatus::Converged));
                    continue;
                }
                if certify_now {
                    if let Some((x, gap, vertex)) = certify(a.view(), &st, c, cfg.tol_primal) {
                        finished.push((c, ColumnStatus::Certified(x, gap, vertex)));
                        continue;
                    }
                }
                if let Some(atdu) = &atdu {
                    if infeasibility_certificate(du.column(c), atdu.column(c), st.lo.column(c), st.hi.column(c)) {
                        finished.push((c, ColumnStatus::Infeasible));
                        continue;
                    }
                }
                if cfg.adaptive_penalty && adapt_now && dual_rel > 0.0 {
                    let ratio = pri_rel / dual_rel;
                    if !(0.2..=5.0).contains(&ratio) {
                        let new_rho = (rho * ratio.sqrt()).clamp(1e-6, 1e6);
                        let scale = rho / new_rho;
                        st.u.column_mut(c).mapv_inplace(|v| v * scale);
                        st.v.column_mut(c).mapv_inplace(|v| v * scale);
                        st.rho[c] = new_rho;
                    }
                }
            }
            st.u_check = st.u.clone();

            if iter == cfg.max_iters {
                for c in 0..na {
                    if !finished.iter().any(|(fc, _)| *fc == c) {
                        finished.push((c, ColumnStatus::MaxIters));
                    }
                }
            }
            if !finished.is_empty() {
                finished.sort_by_key(|(c, _)| *c);
                let done: Vec<usize> = finished.iter().map(|(c, _)| *c).collect();
                for (c, status) in finished {
                    let orig = st.idx[c];
                    out[orig] = Some(self.finalize(&st, c, status, iter, lambda, rhs.column(orig), cfg));
                }
                let keep: Vec<usize> = (0..na).filter(|c| !done.contains(c)).collect();
                st.retain(&keep);
            }
        }
        // columns still active when the loop ends (max_iters hit between checks)
        for c in 0..st.width() {
            let orig = st.idx[c];
            out[orig] = Some(self.finalize(&st, c, ColumnStatus::MaxIters, iter, lambda, rhs.column(orig), cfg));
        }
        Ok(out.into_iter().map(|r| r.expect("every column finalized")).collect())
    }

    #[allow(clippy::too_many_arguments)]
    fn finalize(
        &self,
        st: &BlockState,
        c: usize,
        status: ColumnStatus,
        iterations: usize,
        lambda: f64,
        b: ArrayView1<f64>,
        cfg: &SolverConfig,
    ) -> Result<SolveReport> {
        let (converged, mut solution, mut polished, mut duality_gap) = match status {
            ColumnStatus::Infeasible => {
                return Err(Error::Infeasible(format!(
                    "no x satisfies |Ax - b|_inf <= {lambda:.6e} (certificate found after {iterations} iterations); increase lambda"
                )))
            }
            ColumnStatus::Certified(x, gap, vertex) => (true, x, vertex, Some(gap)),
            ColumnStatus::Converged => (true, st.w.column(c).to_owned(), false, None),
            ColumnStatus::MaxIters => (false, st.w.column(c).to_owned(), false, None),
        };
        if converged && !polished && cfg.polish {
            if let Some(x) = polish(self.scaled.view(), &st, c) {
                let obj_w = linalg::norm_l1(solution.view());
                if linalg::norm_l1(x.view()) <= obj_w + 1e-6 * (1.0 + obj_w) {
                    duality_gap = dual_gap(self.scaled.view(), &st, c, &x);
                    solution = x;
                    polished = true;
                }
            }
        }
        let max_violation = violation(self.a.view(), b, lambda, solution.view());
        Ok(SolveReport {
            objective: linalg::norm_l1(solution.view()),
            solution,
            iterations,
            primal_residual: st.last_pri[c],
            dual_residual: st.last_dual[c],
            converged,
            polished,
            max_violation,
            duality_gap,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum ColumnStatus {
    Converged,
    /// A point with its proven relative duality gap; the flag marks a
    /// polished vertex (as opposed to the feasible ADMM iterate).
    Certified(Array1<f64>, f64, bool),
    Infeasible,
    MaxIters,
}

/// Iterates for the columns still being solved.
struct BlockState {
    idx: Vec<usize>,
    x: Array2<f64>,
    z: Array2<f64>,
    w: Array2<f64>,
    u: Array2<f64>,
    v: Array2<f64>,
    u_check: Array2<f64>,
    lo: Array2<f64>,
    hi: Array2<f64>,
    rho: Vec<f64>,
    last_pri: Vec<f64>,
    last_dual: Vec<f64>,
}

impl BlockState {
    fn start(
        solver: &L1LinfSolver,
        rhs: ArrayView2<f64>,
        lambda: f64,
        warm: Option<ArrayView2<f64>>,
        penalty: f64,
    ) -> Result<Self> {
        let (k, m) = solver.scaled.dim();
        let c = rhs.ncols();
        let sc = solver.scale;
        let lo = rhs.mapv(|v| (v - lambda) / sc).as_standard_layout().to_owned();
        let hi = rhs.mapv(|v| (v + lambda) / sc).as_standard_layout().to_owned();
        let (x, z) = match warm {
            Some(w0) => {
                if w0.dim() != (m, c) {
                    return Err(Error::InvalidInput(format!(
                        "warm start has shape {:?}, expected {:?}",
                        w0.dim(),
                        (m, c)
                    )));
                }
                let x = w0.as_standard_layout().to_owned();
                let mut z = solver.scaled.dot(&x);
                z.zip_mut_with(&lo, |v, l| *v = v.max(*l));
                z.zip_mut_with(&hi, |v, h| *v = v.min(*h));
                (x, z)
            }
            None => (Array2::zeros((m, c)), Array2::zeros((k, c))),
        };
        let w = x.clone();
        Ok(BlockState {
            idx: (0..c).collect(),
            x,
            z,
            w,
            u: Array2::zeros((k, c)),
            v: Array2::zeros((m, c)),
            u_check: Array2::zeros((k, c)),
            lo,
            hi,
            rho: vec![penalty; c],
            last_pri: vec![f64::INFINITY; c],
            last_dual: vec![f64::INFINITY; c],
        })
    }

    fn width(&self) -> usize {
        self.idx.len()
    }

    fn retain(&mut self, keep: &[usize]) {
        let sel = |a: &Array2<f64>| a.select(Axis(1), keep).as_standard_layout().into_owned();
        self.x = sel(&self.x);
        self.z = sel(&self.z);
        self.w = sel(&self.w);
        self.u = sel(&self.u);
        self.v = sel(&self.v);
        self.u_check = sel(&self.u_check);
        self.lo = sel(&self.lo);
        self.hi = sel(&self.hi);
        self.idx = keep.iter().map(|&c| self.idx[c]).collect();
        self.rho = keep.iter().map(|&c| self.rho[c]).collect();
        self.last_pri = keep.iter().map(|&c| self.last_pri[c]).collect();
        self.last_dual = keep.iter().map(|&c| self.last_dual[c]).collect();
    }
}

/// Farkas certificate for `{x : lo ≤ A x ≤ hi} = ∅` from the growth `y` of
/// the scaled box multipliers: `Aᵀy ≈ 0` while `hiᵀy₊ − loᵀy₋ < 0`.
fn infeasibility_certificate(y: ArrayView1<f64>, aty: ArrayView1<f64>, lo: ArrayView1<f64>, hi: ArrayView1<f64>) -> bool {
    let ny = linalg::norm_inf(y);
    if ny <= 1e-10 {
        return false;
    }
    if linalg::norm_inf(aty) > INFEASIBILITY_TOL * ny {
        return false;
    }
    let support: f64 = y
        .iter()
        .zip(lo.iter().zip(hi.iter()))
        .map(|(yi, (l, h))| if *yi > 0.0 { yi * h } else { yi * l })
        .sum();
    support < -INFEASIBILITY_TOL * ny
}

fn violation(a: ArrayView2<f64>, b: ArrayView1<f64>, lambda: f64, x: ArrayView1<f64>) -> f64 {
    let r = a.dot(&x) - &b;
    (linalg::norm_inf(r.view()) - lambda).max(0.0)
}

/// Solves for the vertex determined by the support of `w` and the box faces
/// `z` rests on; returns it when it is feasible (in scaled units) and keeps
/// the sign pattern of `w`.
fn polish(a: ArrayView2<f64>, st: &BlockState, c: usize) -> Option<Array1<f64>> {
    let w = st.w.column(c);
    let (active, target) = active_faces(st, c);
    let support: Vec<usize> = (0..w.len()).filter(|&j| w[j] != 0.0).collect();
    if support.is_empty() || active.len() < support.len() {
        return None;
    }
    if let Some(x) = vertex(a, st, c, &active, &target, &support) {
        return Some(x);
    }
    if active.len() > support.len() {
        // degenerate or misidentified faces: keep those with the largest multipliers
        let u = st.u.column(c);
        let mut order: Vec<usize> = (0..active.len()).collect();
        order.sort_by(|&p, &q| u[active[q]].abs().total_cmp(&u[active[p]].abs()));
        order.truncate(support.len());
        order.sort_unstable();
        let act: Vec<usize> = order.iter().map(|&k| active[k]).collect();
        let tgt: Array1<f64> = order.iter().map(|&k| target[k]).collect();
        return vertex(a, st, c, &act, &tgt, &support);
    }
    None
}

fn vertex(
    a: ArrayView2<f64>,
    st: &BlockState,
    c: usize,
    active: &[usize],
    target: &Array1<f64>,
    support: &[usize],
) -> Option<Array1<f64>> {
    let w = st.w.column(c);
    let sub = a.select(Axis(0), active).select(Axis(1), support);
    let xs = if active.len() == support.len() {
        linalg::lu_solve(sub.view(), target.view()).ok()?
    } else {
        linalg::least_squares(sub.view(), target.view()).ok()?
    };
    let mut x = Array1::<f64>::zeros(w.len());
    for (v, &j) in xs.iter().zip(support) {
        if v.signum() != w[j].signum() {
            return None;
        }
        x[j] = *v;
    }
    let (lo, hi) = (st.lo.column(c), st.hi.column(c));
    let scale = 1.0 + linalg::norm_inf(lo).max(linalg::norm_inf(hi));
    let ax = a.dot(&x);
    let viol = ax
        .iter()
        .zip(lo.iter().zip(hi.iter()))
        .fold(0.0f64, |acc, (v, (l, h))| acc.max(v - h).max(l - v));
    if viol > 1e-11 * scale {
        return None;
    }
    Some(x)
}

/// Constraints whose box face the `z` iterate sits on, with the face value.
fn active_faces(st: &BlockState, c: usize) -> (Vec<usize>, Array1<f64>) {
    let (z, u) = (st.z.column(c), st.u.column(c));
    let (lo, hi) = (st.lo.column(c), st.hi.column(c));
    let floor = 1e-12 * linalg::norm_inf(u).max(1e-300);
    let mut idx = Vec::new();
    let mut target = Vec::new();
    for i in 0..z.len() {
        if u[i].abs() <= floor {
            continue;
        }
        if u[i] > 0.0 && z[i] == hi[i] {
            idx.push(i);
            target.push(hi[i]);
        } else if u[i] < 0.0 && z[i] == lo[i] {
            idx.push(i);
            target.push(lo[i]);
        }
    }
    (idx, Array1::from(target))
}

/// Largest proven relative gap for `x` over a few dual candidates: the
/// multipliers on the active faces (solved exactly when the vertex system is
/// square) and the scaled ADMM multipliers. Any `y` with `‖Aᵀy‖_∞ ≤ 1` gives
/// `‖x‖₁ ≥ −Σ_i max(y_i·hi_i, y_i·lo_i)`.
fn dual_gap(a: ArrayView2<f64>, st: &BlockState, c: usize, x: &Array1<f64>) -> Option<f64> {
    let (lo, hi) = (st.lo.column(c), st.hi.column(c));
    let k = lo.len();
    let mut candidates: Vec<Array1<f64>> = Vec::with_capacity(3);
    let y_admm = st.u.column(c).mapv(|v| v * st.rho[c]);
    let (active, _) = active_faces(st, c);
    let support: Vec<usize> = (0..x.len()).filter(|&j| x[j] != 0.0).collect();
    if !support.is_empty() && active.len() == support.len() {
        // stationarity on the support: A_{act,S}ᵀ y_act = −sign(x_S)
        let sub_t = a.select(Axis(0), &active).select(Axis(1), &support).reversed_axes();
        let rhs: Array1<f64> = support.iter().map(|&j| -x[j].signum()).collect();
        if let Ok(ya) = linalg::lu_solve(sub_t.view(), rhs.view()) {
            let mut y = Array1::zeros(k);
            for (v, &i) in ya.iter().zip(&active) {
                y[i] = *v;
            }
            candidates.push(y);
        }
    }
    let mut masked = Array1::zeros(k);
    for &i in &active {
        masked[i] = y_admm[i];
    }
    candidates.push(masked);
    candidates.push(y_admm);

    let obj = linalg::norm_l1(x.view());
    let mut best = f64::NEG_INFINITY;
    for y in candidates {
        let g = linalg::norm_inf(a.t().dot(&y).view());
        if !g.is_finite() || g == 0.0 && linalg::norm_inf(y.view()) == 0.0 {
            continue;
        }
        for sign in [1.0, -1.0] {
            let t = sign / g.max(1.0);
            let support_fn: f64 = y
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .map(|(yi, (l, h))| {
                    let v = yi * t;
                    (v * h).max(v * l)
                })
                .sum();
            best = best.max(-support_fn);
        }
    }
    // the zero vector is always dual feasible
    best = best.max(0.0);
    Some((obj - best).max(0.0) / (1.0 + obj))
}

/// A point for column `c` whose relative duality gap is within `tol`: the
/// polished vertex when it qualifies, else the ADMM iterate `w` if it is
/// feasible to within `tol` (relative, scaled units).
fn certify(a: ArrayView2<f64>, st: &BlockState, c: usize, tol: f64) -> Option<(Array1<f64>, f64, bool)> {
    if let Some(x) = polish(a, st, c) {
        if let Some(gap) = dual_gap(a, st, c, &x).filter(|g| *g <= tol) {
            return Some((x, gap, true));
        }
    }
    let w = st.w.column(c).to_owned();
    let (lo, hi) = (st.lo.column(c), st.hi.column(c));
    let scale = 1.0 + linalg::norm_inf(lo).max(linalg::norm_inf(hi));
    let viol = a
        .dot(&w)
        .iter()
        .zip(lo.iter().zip(hi.iter()))
        .fold(0.0f64, |acc, (v, (l, h))| acc.max(v - h).max(l - v));
    if viol > tol * scale {
        return None;
    }
    let gap = dual_gap(a, st, c, &w)?;
    (gap <= tol).then_some((w, gap, false))
}
