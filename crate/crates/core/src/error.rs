use std::fmt;

use thiserror::Error;

/// Pipeline stage that produced an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Design,
    Dantzig,
    Clime,
    Inference,
    Simulation,
    Theory,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Design => "design",
            Stage::Dantzig => "dantzig",
            Stage::Clime => "clime",
            Stage::Inference => "inference",
            Stage::Simulation => "simulation",
            Stage::Theory => "theory",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("column {0} never observed")]
    ColumnNeverObserved(usize),

    #[error("non-finite observed value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("likely infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge after {iterations} iterations (primal {primal_residual:.3e}, dual {dual_residual:.3e})")]
    NotConverged {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
    },

    #[error("matrix is not positive definite or numerically singular: {0}")]
    Singular(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("variance estimate not positive for coordinate {coord}: increase n or check inputs")]
    NonPositiveVariance { coord: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn at(self, stage: Stage) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    /// True for failures of the numerical kind (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::Infeasible(_)
                | Error::NotConverged { .. }
                | Error::Singular(_)
                | Error::NonPositiveVariance { .. }
                | Error::CheckFailed(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}
