//! Sparse high-dimensional linear regression when covariates are missing
//! completely at random: modified Dantzig selector point estimates, CLIME
//! precision estimates, de-biased confidence intervals, a simulation harness
//! and numerical checks of the lower-bound constructions.

pub mod clime;
pub mod dantzig;
pub mod design;
pub mod error;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod simulation;
pub mod solver;
pub mod stats;
pub mod theory;

pub use clime::{auto_nu, fit_clime, fit_clime_columns, ClimeConfig, Nu, PrecisionFit, SampleInfo};
pub use dantzig::{auto_lambda, CovarianceKind, DantzigConfig, Lambda, RegressionFit};
pub use design::{IncompleteDesign, MomentKind, NoiseSpec, SurrogateMoments};
pub use inference::{run_inference, InferenceOptions, InferenceResult};
pub use error::{Error, Result, Stage};
pub use solver::{lp_oracle, solve_l1_linf, L1LinfSolver, SolveReport, SolverConfig};
