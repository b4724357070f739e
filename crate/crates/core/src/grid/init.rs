//! Seeded random fields used as initial data and test inputs.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{l2_norm, GridSpec, ScalarField, VelocityField};

/// Sum of Gaussian eddies in the stream function, damped by
/// `sin^2(pi x / lx) sin^2(pi y / ly)` so that the velocity vanishes on the
/// walls, scaled to L2 norm `amplitude`.
pub fn random_eddies(grid: &GridSpec, seed: u64, amplitude: f64) -> VelocityField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eddies: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            let x = grid.lx * rng.random_range(0.15..0.85);
            let y = grid.ly * rng.random_range(0.15..0.85);
            let r = grid.lx.min(grid.ly) * rng.random_range(0.08..0.2);
            let a = rng.random_range(-1.0..1.0);
            (x, y, r, a)
        })
        .collect();
    let psi = |x: f64, y: f64| {
        let cut = ((PI * x / grid.lx).sin() * (PI * y / grid.ly).sin()).powi(2);
        cut * eddies
            .iter()
            .map(|&(cx, cy, r, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * r * r)).exp())
            .sum::<f64>()
    };
    normalized(grid, VelocityField::from_stream_function(grid, psi), amplitude)
}

/// Low-frequency random stream function
/// `sum_{k,l <= modes} c_kl sin(k pi x / lx) sin(l pi y / ly)` damped as in
/// [`random_eddies`]. Being defined in continuous coordinates, the same seed
/// gives the same field at every resolution.
pub fn random_smooth_velocity(grid: &GridSpec, seed: u64, modes: usize, amplitude: f64) -> VelocityField {
    let coeffs = smooth_coefficients(seed, modes);
    let psi = |x: f64, y: f64| {
        let cut = ((PI * x / grid.lx).sin() * (PI * y / grid.ly).sin()).powi(2);
        cut * sine_series(&coeffs, modes, x / grid.lx, y / grid.ly)
    };
    normalized(grid, VelocityField::from_stream_function(grid, psi), amplitude)
}

/// Smooth random cell field, see [`random_smooth_velocity`].
pub fn random_smooth_scalar(grid: &GridSpec, seed: u64, modes: usize) -> ScalarField {
    let coeffs = smooth_coefficients(seed, modes);
    ScalarField::from_fn(grid, |x, y| sine_series(&coeffs, modes, x / grid.lx, y / grid.ly))
}

fn smooth_coefficients(seed: u64, modes: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..modes * modes).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn sine_series(coeffs: &[f64], modes: usize, x: f64, y: f64) -> f64 {
    let mut s = 0.0;
    for l in 0..modes {
        for k in 0..modes {
            let decay = 1.0 / ((k + l + 2) as f64);
            s += decay * coeffs[l * modes + k] * (PI * (k + 1) as f64 * x).sin() * (PI * (l + 1) as f64 * y).sin();
        }
    }
    s
}

fn normalized(grid: &GridSpec, mut v: VelocityField, amplitude: f64) -> VelocityField {
    // the damped stream function vanishes on the walls up to rounding
    v.clear_boundary();
    let n = l2_norm(grid, &v);
    if n > 0.0 {
        v.scale(amplitude / n);
    }
    v
}
