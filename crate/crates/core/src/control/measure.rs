use crate::grid::{cell_energy_density, vector_laplacian, GridSpec, ScalarField, VelocityField};

/// `sum_c w(c) d(c) * cell_area`, skipping cells where `skip(c)`.
pub(crate) fn weighted_integral(
    grid: &GridSpec,
    density: &ScalarField,
    weight: impl Fn(usize) -> f64,
    skip: impl Fn(usize) -> bool,
) -> f64 {
    density
        .as_slice()
        .iter()
        .enumerate()
        .filter(|&(c, _)| !skip(c))
        .map(|(c, d)| weight(c) * d)
        .sum::<f64>()
        * grid.cell_area()
}

pub(crate) fn energy_integral(grid: &GridSpec, v: &VelocityField) -> f64 {
    cell_energy_density(grid, v).integral(grid)
}

/// `(v_{n+1} - v_n) / dt` for every step.
pub(crate) fn time_differences(grid: &GridSpec, v: &[VelocityField]) -> Vec<VelocityField> {
    let dt = grid.dt();
    v.windows(2).map(|w| w[1].sub(&w[0]).scaled(1.0 / dt)).collect()
}

pub(crate) fn laplacian_density(grid: &GridSpec, v: &VelocityField) -> ScalarField {
    cell_energy_density(grid, &vector_laplacian(grid, v))
}
