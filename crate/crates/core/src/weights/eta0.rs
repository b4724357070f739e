//! The spatial weight `eta0` and the choice of `lambda` and `m0`.

use std::f64::consts::PI;

use super::profile::tau_profile;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, RegionMask, ScalarField};

/// `sin(pi x / lx) sin(pi y / ly)`: positive inside, zero on the boundary,
/// with its only interior critical point at the center of the box.
pub fn build_eta0(grid: &GridSpec, mask: &RegionMask) -> Result<ScalarField> {
    if !mask.matches(grid) {
        return Err(Error::Shape("observation mask does not match the grid".into()));
    }
    let (cx, cy) = (0.5 * grid.lx, 0.5 * grid.ly);
    let (dx, dy) = (grid.dx(), grid.dy());
    let covers_center = (0..grid.ny).any(|j| {
        (0..grid.nx).any(|i| {
            mask.contains(i, j)
                && i as f64 * dx <= cx
                && cx <= (i + 1) as f64 * dx
                && j as f64 * dy <= cy
                && cy <= (j + 1) as f64 * dy
        })
    });
    if !covers_center {
        return Err(Error::invalid(
            "region.omega0",
            "must contain the center of the domain so that the spatial weight has no critical point outside it",
        ));
    }
    let eta = ScalarField::from_fn(grid, |x, y| (PI * x / grid.lx).sin() * (PI * y / grid.ly).sin());
    let gmin = min_gradient_outside(grid, mask);
    if gmin.is_nan() || gmin <= 0.0 {
        return Err(Error::invalid("region.omega0", "spatial weight has a critical point outside the region"));
    }
    Ok(eta)
}

/// Analytic `|grad eta0|` at `(x, y)`.
pub fn eta0_gradient_norm(grid: &GridSpec, x: f64, y: f64) -> f64 {
    let (ax, ay) = (PI / grid.lx, PI / grid.ly);
    let gx = ax * (ax * x).cos() * (ay * y).sin();
    let gy = ay * (ax * x).sin() * (ay * y).cos();
    gx.hypot(gy)
}

/// Smallest `|grad eta0|` over cell centers outside the region.
pub fn min_gradient_outside(grid: &GridSpec, mask: &RegionMask) -> f64 {
    let mut m = f64::INFINITY;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if !mask.contains(i, j) {
                let (x, y) = grid.cell_center(i, j);
                m = m.min(eta0_gradient_norm(grid, x, y));
            }
        }
    }
    m
}

/// `e^{lambda (|eta|_inf + m0 + 1)} - e^{lambda (eta + m0)}` per cell,
/// evaluated without cancellation.
pub fn weight_numerator(eta0: &ScalarField, lambda: f64, m0: f64) -> Vec<f64> {
    let sup = eta0.max_abs();
    eta0.as_slice()
        .iter()
        .map(|&e| (lambda * (e + m0)).exp() * (lambda * (sup + 1.0 - e)).exp_m1())
        .collect()
}

/// `max N / min N` for the numerator above.
pub fn numerator_ratio(eta0: &ScalarField, lambda: f64, m0: f64) -> f64 {
    let n = weight_numerator(eta0, lambda, m0);
    let max = n.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = n.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// Smallest `lambda` (to within `1e-6`) with `max N <= 2 min N`.
pub fn find_lambda00(eta0: &ScalarField, m0: f64) -> f64 {
    let ok = |l: f64| numerator_ratio(eta0, l, m0) <= 2.0;
    let mut hi = 1.0;
    while !ok(hi) {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Empirical constants of `|alpha_t| <= C xi^{9/8}` and
/// `|alpha_tt| <= C xi^{5/4}` over the cells and interior time nodes. Both
/// ratios are independent of `s` and of any capping.
pub fn alpha_derivative_constants(grid: &GridSpec, eta0: &ScalarField, lambda: f64, m0: f64) -> Result<(f64, f64)> {
    let num = weight_numerator(eta0, lambda, m0);
    let (mut c1, mut c2) = (0.0_f64, 0.0_f64);
    for n in 1..grid.nt {
        let p = tau_profile(grid.time(n), grid.t_final)?;
        for (&nn, &e) in num.iter().zip(eta0.as_slice()) {
            let base = lambda * (e + m0);
            // |alpha_t| / xi^{9/8} = 8 N |tau'| tau^{-9} / (e^{9/8 base} tau^{-9})
            c1 = c1.max(8.0 * nn * p.d1.abs() / (1.125 * base).exp());
            // alpha_tt = N (72 tau'^2 - 8 tau tau'') / tau^10
            let tt = nn * (72.0 * p.d1 * p.d1 - 8.0 * p.value * p.d2).abs();
            c2 = c2.max(tt / (1.25 * base).exp());
        }
    }
    Ok((c1, c2))
}

/// Smallest power of two `m0` such that both derivative constants change by
/// less than 10% when `m0` is doubled.
pub fn select_m0(grid: &GridSpec, eta0: &ScalarField, lambda: f64) -> Result<f64> {
    let mut m0 = 1.0;
    let mut prev = alpha_derivative_constants(grid, eta0, lambda, m0)?;
    while m0 < 1024.0 {
        let next = alpha_derivative_constants(grid, eta0, lambda, 2.0 * m0)?;
        let stable = |a: f64, b: f64| (a - b).abs() <= 0.1 * a.abs().max(b.abs());
        if stable(prev.0, next.0) && stable(prev.1, next.1) {
            return Ok(m0);
        }
        m0 *= 2.0;
        prev = next;
    }
    Ok(m0)
}
