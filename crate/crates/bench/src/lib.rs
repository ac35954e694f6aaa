//! Fixtures shared by the benchmarks.

use frachum_core::hum::HumProblem;
use frachum_core::models::preset;
use frachum_core::spectral::SpectralField;

/// Example-1 geometry at truncation order `order`, linear dynamics.
pub fn linear_problem(order: usize) -> HumProblem {
    let mut spec = preset("example1").expect("builtin preset").problem;
    spec.nonlinear = frachum_core::fode::NonlinearSpec::none();
    spec.disc.order = order;
    spec.disc.grid_points = spec.disc.grid_points.max(2 * (order + 1));
    spec.disc.projection_points = spec.disc.projection_points.max(2 * (order + 1));
    spec.build().expect("valid problem")
}

/// Deterministic, slowly decaying coefficients.
pub fn sample_field(order: usize) -> SpectralField {
    let n = (order + 1) * (order + 1);
    let coeffs = (0..n)
        .map(|i| ((i as f64 * 0.7).sin()) / (1.0 + i as f64))
        .collect();
    SpectralField::from_coeffs(order, coeffs).expect("square length")
}
