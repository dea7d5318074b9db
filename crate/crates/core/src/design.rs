//! Designs with covariates missing completely at random, and the
//! inverse-probability-weighted surrogate moments built from them.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::Serialize;

use crate::error::{check_len, Error, Result};

/// An `n × p` design whose unobserved entries are stored as zero, with the
/// observation mask and per-column observation rates.
#[derive(Debug, Clone)]
pub struct IncompleteDesign {
    values: Array2<f64>,
    mask: Array2<u8>,
    rates: Array1<f64>,
    rates_estimated: bool,
}

impl IncompleteDesign {
    /// Builds a design from a matrix where missing entries are `None`.
    ///
    /// When `rates` is `None` each column's rate is its observed fraction,
    /// floored at `1/(2n)`.
    pub fn from_raw(raw: &[Vec<Option<f64>>], rates: Option<&[f64]>) -> Result<Self> {
        let n = raw.len();
        if n == 0 {
            return Err(Error::InvalidInput("design has no rows".into()));
        }
        let p = raw[0].len();
        if p == 0 {
            return Err(Error::InvalidInput("design has no columns".into()));
        }
        let mut values = Array2::<f64>::zeros((n, p));
        let mut mask = Array2::<u8>::zeros((n, p));
        for (i, row) in raw.iter().enumerate() {
            check_len("row length", p, row.len())?;
            for (j, v) in row.iter().enumerate() {
                if let Some(x) = v {
                    if !x.is_finite() {
                        return Err(Error::NonFinite { row: i, col: j });
                    }
                    values[[i, j]] = *x;
                    mask[[i, j]] = 1;
                }
            }
        }
        Self::from_parts(values, mask, rates.map(|r| Array1::from(r.to_vec())))
    }

    /// Builds a design from zero-imputed values and a 0/1 mask. Values at
    /// masked positions are zeroed.
    pub fn from_parts(
        mut values: Array2<f64>,
        mask: Array2<u8>,
        rates: Option<Array1<f64>>,
    ) -> Result<Self> {
        let (n, p) = values.dim();
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput("design must be at least 1x1".into()));
        }
        if mask.dim() != (n, p) {
            return Err(Error::InvalidInput(format!(
                "mask shape {:?} does not match values shape {:?}",
                mask.dim(),
                (n, p)
            )));
        }
        for ((i, j), m) in mask.indexed_iter() {
            match m {
                0 => values[[i, j]] = 0.0,
                1 => {
                    if !values[[i, j]].is_finite() {
                        return Err(Error::NonFinite { row: i, col: j });
                    }
                }
                _ => return Err(Error::InvalidInput(format!("mask entry {m} is not 0 or 1"))),
            }
        }
        let (rates, rates_estimated) = match rates {
            Some(r) => {
                check_len("rates", p, r.len())?;
                if let Some((j, bad)) = r.iter().enumerate().find(|(_, r)| !(**r > 0.0 && **r <= 1.0)) {
                    return Err(Error::InvalidInput(format!(
                        "rate {bad} for column {j} is outside (0, 1]"
                    )));
                }
                (r, false)
            }
            None => {
                let floor = 1.0 / (2.0 * n as f64);
                let mut r = Array1::<f64>::zeros(p);
                for j in 0..p {
                    let observed = mask.column(j).iter().filter(|m| **m == 1).count();
                    if observed == 0 {
                        return Err(Error::ColumnNeverObserved(j));
                    }
                    r[j] = (observed as f64 / n as f64).max(floor);
                }
                (r, true)
            }
        };
        Ok(IncompleteDesign {
            values,
            mask,
            rates,
            rates_estimated,
        })
    }

    /// Applies an MCAR mask to a fully observed design.
    pub fn from_full(full: ArrayView2<f64>, mask: Array2<u8>, rates: Array1<f64>) -> Result<Self> {
        Self::from_parts(full.to_owned(), mask, Some(rates))
    }

    /// A fully observed design (all rates equal to one).
    pub fn fully_observed(full: ArrayView2<f64>) -> Result<Self> {
        let (n, p) = full.dim();
        Self::from_parts(
            full.to_owned(),
            Array2::from_elem((n, p), 1),
            Some(Array1::ones(p)),
        )
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn mask(&self) -> ArrayView2<'_, u8> {
        self.mask.view()
    }

    pub fn rates(&self) -> ArrayView1<'_, f64> {
        self.rates.view()
    }

    /// Whether the rates were estimated from the mask rather than supplied.
    pub fn rates_estimated(&self) -> bool {
        self.rates_estimated
    }

    pub fn rho_star(&self) -> f64 {
        self.rates.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `X̃_ij = X̄_ij / ρ_j`.
    pub fn scaled_design(&self) -> Array2<f64> {
        let mut x = self.values.clone();
        for (mut col, r) in x.axis_iter_mut(Axis(1)).zip(self.rates.iter()) {
            col.mapv_inplace(|v| v / r);
        }
        x
    }

    /// `Σ̃ = X̃ᵀX̃/n − D diag(X̃ᵀX̃/n)` with `D = diag(1 − ρ_j)`; equivalently the
    /// diagonal of `X̃ᵀX̃/n` is multiplied by `ρ_j`.
    pub fn surrogate_covariance(&self) -> Array2<f64> {
        surrogate_covariance_of(self.scaled_design().view(), self.rates.view())
    }

    /// `c̃ = X̃ᵀy / n`.
    pub fn surrogate_cross(&self, y: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_len("response length", self.n(), y.len())?;
        Ok(cross_of(self.scaled_design().view(), y))
    }
}

/// Gram matrix `XᵀX / n`, accumulated over rows in order (row-major), lower
/// triangle computed and mirrored. Zero entries are skipped, which does not
/// change any partial sum.
pub fn gram(x: ArrayView2<f64>) -> Array2<f64> {
    let (n, p) = x.dim();
    let mut acc = vec![0.0f64; p * p];
    let mut row = vec![0.0f64; p];
    for r in x.axis_iter(Axis(0)) {
        row.iter_mut().zip(r.iter()).for_each(|(d, s)| *d = *s);
        for j in 0..p {
            let xj = row[j];
            if xj == 0.0 {
                continue;
            }
            let dst = &mut acc[j * p..j * p + j + 1];
            for (d, xk) in dst.iter_mut().zip(&row[..=j]) {
                *d += xj * xk;
            }
        }
    }
    let nf = n as f64;
    let mut g = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        for k in 0..=j {
            let v = acc[j * p + k] / nf;
            g[[j, k]] = v;
            g[[k, j]] = v;
        }
    }
    g
}

pub(crate) fn surrogate_covariance_of(x_scaled: ArrayView2<f64>, rates: ArrayView1<f64>) -> Array2<f64> {
    let mut s = gram(x_scaled);
    for (j, r) in rates.iter().enumerate() {
        s[[j, j]] *= r;
    }
    s
}

pub(crate) fn cross_of(x_scaled: ArrayView2<f64>, y: ArrayView1<f64>) -> Array1<f64> {
    let n = x_scaled.nrows() as f64;
    let mut c = Array1::<f64>::zeros(x_scaled.ncols());
    for (row, yi) in x_scaled.axis_iter(Axis(0)).zip(y.iter()) {
        c.scaled_add(*yi, &row);
    }
    c / n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MomentKind {
    SurrogateUnknown,
    PopulationKnown,
}

/// The `(Σ, c̃)` pair consumed by the estimators.
#[derive(Debug, Clone)]
pub struct SurrogateMoments {
    pub sigma: Array2<f64>,
    pub cross: Array1<f64>,
    pub kind: MomentKind,
    pub n: usize,
    pub rho_star: f64,
}

impl SurrogateMoments {
    /// Surrogate covariance and cross term from the incomplete design.
    pub fn from_design(d: &IncompleteDesign, y: ArrayView1<f64>) -> Result<Self> {
        check_len("response length", d.n(), y.len())?;
        let xs = d.scaled_design();
        Ok(SurrogateMoments {
            sigma: surrogate_covariance_of(xs.view(), d.rates()),
            cross: cross_of(xs.view(), y),
            kind: MomentKind::SurrogateUnknown,
            n: d.n(),
            rho_star: d.rho_star(),
        })
    }

    /// Known population covariance `Σ₀` with the surrogate cross term.
    pub fn with_population(d: &IncompleteDesign, y: ArrayView1<f64>, sigma0: ArrayView2<f64>) -> Result<Self> {
        let p = d.p();
        if sigma0.dim() != (p, p) {
            return Err(Error::InvalidInput(format!(
                "population covariance must be {p}x{p}, got {:?}",
                sigma0.dim()
            )));
        }
        if sigma0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("population covariance has non-finite entries".into()));
        }
        let mut sigma = sigma0.to_owned();
        // average the two triangles so the stored matrix is exactly symmetric
        for i in 0..p {
            for j in 0..i {
                let v = 0.5 * (sigma[[i, j]] + sigma[[j, i]]);
                sigma[[i, j]] = v;
                sigma[[j, i]] = v;
            }
        }
        Ok(SurrogateMoments {
            sigma,
            cross: d.surrogate_cross(y)?,
            kind: MomentKind::PopulationKnown,
            n: d.n(),
            rho_star: d.rho_star(),
        })
    }

    pub fn p(&self) -> usize {
        self.cross.len()
    }
}

/// Noise scale `σ_ε` and sub-Gaussian design scale `σ_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseSpec {
    pub sigma_eps: f64,
    pub sigma_x: f64,
}

impl NoiseSpec {
    pub fn new(sigma_eps: f64, sigma_x: f64) -> Result<Self> {
        if !(sigma_eps >= 0.0 && sigma_eps.is_finite()) || !(sigma_x >= 0.0 && sigma_x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "noise scales must be finite and nonnegative (sigma_eps={sigma_eps}, sigma_x={sigma_x})"
            )));
        }
        Ok(NoiseSpec { sigma_eps, sigma_x })
    }
}

/// Heuristic `σ_x`: the largest column standard deviation of `X̃`.
pub fn sigma_x_heuristic(d: &IncompleteDesign) -> f64 {
    let xs = d.scaled_design();
    let n = xs.nrows() as f64;
    xs.axis_iter(Axis(1))
        .map(|c| {
            let m = c.sum() / n;
            (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt()
        })
        .fold(0.0, f64::max)
}
