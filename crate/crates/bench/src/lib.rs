//! Fixtures shared by the criterion benches.

use pohozaev_core::{Field, Grid, Model, NonlinearitySpec, Result};

/// Unit Gaussian on `[−L, L)^N`.
pub fn gaussian(grid: Grid) -> Field {
    Field::from_fn(grid, |[x, y]| (-(x * x + y * y) / 2.0).exp())
}

/// Log family perturbed at `eps`, the model a continuation stage works with.
pub fn perturbed_log_model(grid: Grid, s: f64, eps: f64) -> Result<Model> {
    Model::new(NonlinearitySpec::log().perturb(eps)?, grid, s)
}
