//! Shared instance builders for the criterion benchmarks.

use missreg::simulation::{generate, stream_rng, SyntheticModel};
use missreg::SurrogateMoments;
use ndarray::{Array1, Array2};

/// One draw from the banded design at `(n, p, ρ)` with 10 signals.
pub struct Instance {
    pub moments: SurrogateMoments,
    pub x_scaled: Array2<f64>,
    pub rates: Array1<f64>,
    pub beta: Array1<f64>,
    pub model: SyntheticModel,
}

pub fn instance(n: usize, p: usize, rho: f64, seed: u64) -> Instance {
    let model = SyntheticModel::banded(p, 10.min(p), rho, 0.1, seed).expect("valid model");
    let sample = generate(&model, n, &mut stream_rng(seed, 1)).expect("valid sample");
    let moments = SurrogateMoments::from_design(&sample.design, sample.y.view()).expect("moments");
    Instance {
        moments,
        x_scaled: sample.design.scaled_design(),
        rates: sample.design.rates().to_owned(),
        beta: model.beta_star.clone(),
        model,
    }
}
