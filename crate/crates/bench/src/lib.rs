//! Fixtures shared by the benchmarks.

use kamtori::fourier::Grid;
use kamtori::geometry::{model_rotator_pendulum, model_standard_map, SymplecticMapModel};
use kamtori::splitting::{cold_start, newton_whiskered_solve, Cocycle, InvariantSplitting, WhiskeredOptions};
use kamtori::torus::{newton_solve, TorusEmbedding, TorusOptions};
use kamtori::RotationVector;

/// Converged golden-mean torus of the standard map on `n` points.
pub fn standard_torus(eps: f64, n: usize) -> (SymplecticMapModel, TorusEmbedding) {
    let model = model_standard_map(eps);
    let start = TorusEmbedding::integrable(&model, &Grid::circle(n).unwrap(), &RotationVector::golden()).unwrap();
    let opts = TorusOptions { auto_refine: false, ..TorusOptions::default() };
    let (t, _) = newton_solve(&start, &model, &opts).unwrap();
    (model, t)
}

/// Whiskered torus of the rotator-pendulum map with its splitting.
pub fn pendulum_torus(eps: f64, n: usize) -> (SymplecticMapModel, TorusEmbedding, InvariantSplitting) {
    let model = model_rotator_pendulum(1.0, eps).unwrap();
    let start = TorusEmbedding::integrable(&model, &Grid::circle(n).unwrap(), &RotationVector::golden()).unwrap();
    let split = cold_start(&Cocycle::from_torus(&start, &model), 1, 1).unwrap();
    let mut opts = WhiskeredOptions::default();
    opts.torus.use_counterterm = true;
    let (mut t, split, _) = newton_whiskered_solve(&start, &split, &model, &opts).unwrap();
    t.lambda = vec![0.0; t.l()];
    (model, t, split)
}
