//! Exact reference solver for small `ℓ1/ℓ∞` problems: a dense two-phase
//! tableau simplex with Bland's rule.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{check_len, Error, Result};

/// Largest number of unknowns accepted by [`lp_oracle`].
pub const LP_ORACLE_MAX_COLS: usize = 12;

const PIVOT_EPS: f64 = 1e-11;

/// Solves `minimize ‖x‖₁ subject to ‖A x − b‖_∞ ≤ λ` exactly as the LP
///
/// ```text
/// minimize 1ᵀ(x⁺ + x⁻)  s.t.  −λ ≤ A(x⁺ − x⁻) − b ≤ λ,  x⁺, x⁻ ≥ 0
/// ```
pub fn lp_oracle(a: ArrayView2<f64>, b: ArrayView1<f64>, lambda: f64) -> Result<Array1<f64>> {
    let (k, m) = a.dim();
    check_len("right-hand side", k, b.len())?;
    if m > LP_ORACLE_MAX_COLS {
        return Err(Error::InvalidInput(format!(
            "lp_oracle supports at most {LP_ORACLE_MAX_COLS} unknowns, got {m}"
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be nonnegative, got {lambda}")));
    }
    // rows:  A x⁺ − A x⁻ ≤ b + λ   and   −A x⁺ + A x⁻ ≤ λ − b
    let rows = 2 * k;
    let nvar = 2 * m;
    let mut g = Array2::<f64>::zeros((rows, nvar));
    let mut h = Array1::<f64>::zeros(rows);
    for i in 0..k {
        for j in 0..m {
            g[[i, j]] = a[[i, j]];
            g[[i, m + j]] = -a[[i, j]];
            g[[k + i, j]] = -a[[i, j]];
            g[[k + i, m + j]] = a[[i, j]];
        }
        h[i] = b[i] + lambda;
        h[k + i] = lambda - b[i];
    }
    let cost = Array1::<f64>::ones(nvar);
    let y = Simplex::solve_leq(g.view(), h.view(), cost.view())?;
    Ok((0..m).map(|j| y[j] - y[m + j]).collect())
}

/// Tableau for `minimize cᵀy s.t. G y ≤ h, y ≥ 0` (any sign of `h`).
struct Simplex {
    /// `rows × (cols + 1)`; the last column is the right-hand side.
    t: Array2<f64>,
    basis: Vec<usize>,
    cols: usize,
    /// Columns allowed to enter the basis.
    allowed: Vec<bool>,
}

impl Simplex {
    fn solve_leq(g: ArrayView2<f64>, h: ArrayView1<f64>, c: ArrayView1<f64>) -> Result<Array1<f64>> {
        let (rows, nvar) = g.dim();
        let n_art = h.iter().filter(|v| **v < 0.0).count();
        // columns: [y (nvar) | slack (rows) | artificial (n_art)]
        let cols = nvar + rows + n_art;
        let mut t = Array2::<f64>::zeros((rows, cols + 1));
        let mut basis = vec![0; rows];
        let mut art = nvar + rows;
        for r in 0..rows {
            let sign = if h[r] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..nvar {
                t[[r, j]] = sign * g[[r, j]];
            }
            t[[r, nvar + r]] = sign;
            t[[r, cols]] = sign * h[r];
            if sign < 0.0 {
                t[[r, art]] = 1.0;
                basis[r] = art;
                art += 1;
            } else {
                basis[r] = nvar + r;
            }
        }
        let mut sx = Simplex {
            t,
            basis,
            cols,
            allowed: vec![true; cols],
        };

        if n_art > 0 {
            let mut phase1 = Array1::<f64>::zeros(cols);
            for j in (nvar + rows)..cols {
                phase1[j] = 1.0;
            }
            let obj = sx.run(phase1.view())?;
            let scale = 1.0 + h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if obj > 1e-9 * scale {
                return Err(Error::Infeasible(format!("infeasible (phase-one objective {obj:.3e})")));
            }
            // pivot zero-level artificials out of the basis where possible
            for r in 0..rows {
                if sx.basis[r] >= nvar + rows {
                    if let Some(j) = (0..nvar + rows).find(|&j| sx.t[[r, j]].abs() > PIVOT_EPS) {
                        sx.pivot(r, j);
                    }
                }
            }
            for j in (nvar + rows)..cols {
                sx.allowed[j] = false;
            }
        }

        let mut phase2 = Array1::<f64>::zeros(cols);
        for j in 0..nvar {
            phase2[j] = c[j];
        }
        sx.run(phase2.view())?;
        let mut y = Array1::<f64>::zeros(nvar);
        for (r, &bv) in sx.basis.iter().enumerate() {
            if bv < nvar {
                y[bv] = sx.t[[r, sx.cols]].max(0.0);
            }
        }
        Ok(y)
    }

    /// Minimizes `costᵀy` from the current basis; returns the optimal value.
    fn run(&mut self, cost: ArrayView1<f64>) -> Result<f64> {
        let rows = self.t.nrows();
        let rhs = self.cols;
        let max_pivots = 50_000;
        for _ in 0..max_pivots {
            // reduced costs: c_j − c_Bᵀ B⁻¹ a_j
            let mut entering = None;
            for j in 0..self.cols {
                if !self.allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                let mut rc = cost[j];
                for r in 0..rows {
                    rc -= cost[self.basis[r]] * self.t[[r, j]];
                }
                if rc < -PIVOT_EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                let mut obj = 0.0;
                for r in 0..rows {
                    obj += cost[self.basis[r]] * self.t[[r, rhs]];
                }
                return Ok(obj);
            };
            // ratio test; ties broken by the smallest basic index
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..rows {
                let coef = self.t[[r, j]];
                if coef > PIVOT_EPS {
                    let ratio = self.t[[r, rhs]] / coef;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12
                                || ((ratio - lratio).abs() <= 1e-12 && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::InvalidInput("linear program is unbounded".into()));
            };
            self.pivot(r, j);
        }
        Err(Error::NotConverged {
            iterations: max_pivots,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
        })
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let width = self.cols + 1;
        let p = self.t[[r, j]];
        for c in 0..width {
            self.t[[r, c]] /= p;
        }
        for rr in 0..self.t.nrows() {
            if rr == r {
                continue;
            }
            let f = self.t[[rr, j]];
            if f == 0.0 {
                continue;
            }
            for c in 0..width {
                let v = self.t[[r, c]];
                self.t[[rr, c]] -= f * v;
            }
        }
        self.basis[r] = j;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_zero_rhs() {
        let x = lp_oracle(Array2::<f64>::eye(2).view(), array![0.0, 0.0].view(), 0.0).unwrap();
        assert_eq!(x, array![0.0, 0.0]);
    }

    #[test]
    fn one_dimensional_soft_threshold() {
        let x = lp_oracle(array![[1.0]].view(), array![3.0].view(), 1.0).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        let x = lp_oracle(array![[1.0]].view(), array![-3.0].view(), 1.0).unwrap();
        assert!((x[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn equality_constrained_solve() {
        let x = lp_oracle(array![[2.0, 1.0], [1.0, 3.0]].view(), array![1.0, 1.0].view(), 0.0).unwrap();
        assert!((x[0] - 0.4).abs() < 1e-12 && (x[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        // two rows demanding x ≈ 1 and x ≈ -1 with a tight box
        let r = lp_oracle(array![[1.0], [1.0]].view(), array![1.0, -1.0].view(), 0.1);
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    #[test]
    fn rejects_large_problems() {
        let a = Array2::<f64>::eye(13);
        assert!(lp_oracle(a.view(), Array1::zeros(13).view(), 1.0).is_err());
    }
}
