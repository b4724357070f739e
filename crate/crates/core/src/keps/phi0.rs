use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::stokes::PhysParams;

const STABLE_STEP: f64 = 1.0;
const MAX_SUBSTEPS: usize = 1 << 20;

/// `int |grad k|^2 / (alpha_reg + k)^2` by the midpoint rule, with
/// `|grad k|^2` from face differences averaged to cell centers and zero
/// normal differences on the walls.
pub fn gradient_ratio_integral(grid: &GridSpec, k: &ScalarField, alpha_reg: f64) -> f64 {
    let (nx, ny) = (grid.nx, grid.ny);
    let (dx, dy) = (grid.dx(), grid.dy());
    let dkx = |i: usize, j: usize| if i == 0 || i == nx { 0.0 } else { (k.get(i, j) - k.get(i - 1, j)) / dx };
    let dky = |i: usize, j: usize| if j == 0 || j == ny { 0.0 } else { (k.get(i, j) - k.get(i, j - 1)) / dy };
    let mut sum = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let gx = 0.5 * (dkx(i, j).powi(2) + dkx(i + 1, j).powi(2));
            let gy = 0.5 * (dky(i, j).powi(2) + dky(i, j + 1).powi(2));
            sum += (gx + gy) / (alpha_reg + k.get(i, j)).powi(2);
        }
    }
    sum * grid.cell_area()
}

/// Integrates `phi0' = -(2 c0 / |Omega|) I(t) phi0^2 + ((a - 2) / |Omega|) K(t)`
/// from `phi00` by classical RK4, where `I` is
/// [`gradient_ratio_integral`] and `K = int k`, both taken at the time nodes
/// and interpolated linearly in between. Each interval is split into
/// equal substeps when the quadratic sink would make a single step unstable.
pub fn integrate_phi0(grid: &GridSpec, phys: &PhysParams, k: &[ScalarField]) -> Result<Vec<f64>> {
    phys.validate()?;
    if k.len() != grid.nt + 1 {
        return Err(Error::Shape(format!("k has {} nodes, expected {}", k.len(), grid.nt + 1)));
    }
    let area = grid.area();
    let ratio: Vec<f64> = k.iter().map(|f| gradient_ratio_integral(grid, f, phys.alpha_reg)).collect();
    let mass: Vec<f64> = k.iter().map(|f| f.integral(grid)).collect();
    let sink = 2.0 * phys.c0 / area;
    let growth = (phys.a - 2.0) / area;
    let rhs = |phi: f64, i: f64, m: f64| -sink * i * phi * phi + growth * m;

    let dt = grid.dt();
    let mut out = Vec::with_capacity(grid.nt + 1);
    let mut phi = phys.phi00;
    out.push(phi);
    for n in 0..grid.nt {
        let at = |theta: f64| {
            (
                ratio[n] + theta * (ratio[n + 1] - ratio[n]),
                mass[n] + theta * (mass[n + 1] - mass[n]),
            )
        };
        // substeps keep h * d(rhs)/d(phi) inside the RK4 stability region
        let stiffness = 2.0 * sink * ratio[n].max(ratio[n + 1]) * phi.abs();
        let substeps = ((dt * stiffness / STABLE_STEP).ceil() as usize).clamp(1, MAX_SUBSTEPS);
        let h = 1.0 / substeps as f64;
        for m in 0..substeps {
            let theta = m as f64 * h;
            let (i0, m0) = at(theta);
            let (ih, mh) = at(theta + 0.5 * h);
            let (i1, m1) = at(theta + h);
            let s1 = rhs(phi, i0, m0);
            let s2 = rhs(phi + 0.5 * h * dt * s1, ih, mh);
            let s3 = rhs(phi + 0.5 * h * dt * s2, ih, mh);
            let s4 = rhs(phi + h * dt * s3, i1, m1);
            phi += h * dt / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4);
            if phi <= 0.0 {
                return Err(Error::ModelBreakdown(format!(
                    "viscosity ratio reached {phi:.3e} at t = {:.4}",
                    grid.time(n) + (theta + h) * dt
                )));
            }
        }
        if !phi.is_finite() {
            return Err(Error::NonFinite(format!("phi0 at step {}", n + 1)));
        }
        out.push(phi);
    }
    Ok(out)
}
