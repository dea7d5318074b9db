//! Solvers for `minimize ‖x‖₁ subject to ‖A x − b‖_∞ ≤ λ`, the template shared
//! by the Dantzig-type estimators and CLIME.

mod admm;
mod lp;

pub use admm::{solve_l1_linf, L1LinfSolver, SolveReport, SolverConfig};
pub use lp::{lp_oracle, LP_ORACLE_MAX_COLS};

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1, Array2};

    #[test]
    fn zero_rhs_gives_zero() {
        let a = array![[1.0, 0.3], [0.3, 2.0], [0.5, -1.0]];
        for lambda in [0.0, 0.5] {
            let r = solve_l1_linf(a.view(), Array1::zeros(3).view(), lambda, &SolverConfig::default()).unwrap();
            assert!(r.converged);
            assert_eq!(r.objective, 0.0);
            assert!(r.solution.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn identity_is_soft_threshold() {
        let a = Array2::<f64>::eye(3);
        let r = solve_l1_linf(a.view(), array![5.0, 0.5, -2.0].view(), 1.0, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        let expected = array![4.0, 0.0, -1.0];
        for (x, e) in r.solution.iter().zip(expected.iter()) {
            assert!((x - e).abs() < 1e-9, "{x} vs {e}");
        }
        assert!((r.objective - 5.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_box_is_reported() {
        let a = array![[1.0], [1.0]];
        let r = solve_l1_linf(a.view(), array![1.0, -1.0].view(), 0.1, &SolverConfig::default());
        assert!(matches!(r, Err(crate::Error::Infeasible(_))), "{r:?}");
    }

    #[test]
    fn max_iters_reports_not_converged() {
        let a = array![[2.0, 1.0], [1.0, 3.0]];
        let cfg = SolverConfig { max_iters: 3, ..SolverConfig::default() };
        let r = solve_l1_linf(a.view(), array![1.0, 1.0].view(), 0.01, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn batch_matches_single_solves() {
        let a = array![[2.0, 0.5, 0.1], [0.5, 1.5, -0.2], [0.1, -0.2, 1.0]];
        let rhs = array![[1.0, 0.0, 0.3], [0.0, 1.0, -0.4], [0.2, 0.0, 1.0]];
        let solver = L1LinfSolver::new(a.view()).unwrap();
        let cfg = SolverConfig::default();
        let batch = solver.solve_batch(rhs.view(), 0.1, &cfg, None).unwrap();
        for (c, rep) in batch.into_iter().enumerate() {
            let rep = rep.unwrap();
            let single = solver.solve(rhs.column(c), 0.1, &cfg, None).unwrap();
            assert!((rep.objective - single.objective).abs() < 1e-9);
            let lp = lp_oracle(a.view(), rhs.column(c), 0.1).unwrap();
            let lp_obj: f64 = lp.iter().map(|v| v.abs()).sum();
            assert!((rep.objective - lp_obj).abs() < 1e-7 * (1.0 + lp_obj));
        }
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SolverConfig { over_relaxation: 2.0, ..SolverConfig::default() };
        let a = Array2::<f64>::eye(1);
        assert!(solve_l1_linf(a.view(), array![1.0].view(), 0.1, &cfg).is_err());
        assert!(solve_l1_linf(a.view(), array![1.0].view(), -0.1, &SolverConfig::default()).is_err());
    }
}
