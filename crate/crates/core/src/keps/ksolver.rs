use crate::error::{Error, Result};
use crate::grid::{sym_gradient_norm2, GridSpec, ScalarField, VelocityField};
use crate::stokes::PhysParams;

/// Relative change per sweep below which the implicit step is solved.
const SWEEP_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 20_000;

/// Largest step for which explicit upwind advection by `v` keeps the
/// update monotone: `dt * max(|u_c| / dx + |v_c| / dy) <= 1` at cell
/// centers. Infinite for `v = 0`.
pub fn advective_dt_limit(grid: &GridSpec, v: &VelocityField) -> f64 {
    let (dx, dy) = (grid.dx(), grid.dy());
    let mut rate = 0.0f64;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (u, w) = cell_velocity(v, i, j);
            rate = rate.max(u.abs() / dx + w.abs() / dy);
        }
    }
    if rate > 0.0 {
        1.0 / rate
    } else {
        f64::INFINITY
    }
}

fn cell_velocity(v: &VelocityField, i: usize, j: usize) -> (f64, f64) {
    (0.5 * (v.ux_at(i, j) + v.ux_at(i + 1, j)), 0.5 * (v.uy_at(i, j) + v.uy_at(i, j + 1)))
}

/// `k / dt - v . grad k` by first-order upwinding, mirrored ghosts at the
/// walls. Written as a combination of `k` values whose weights are all
/// nonnegative when `dt` respects [`advective_dt_limit`].
fn explicit_transport(grid: &GridSpec, v: &VelocityField, k: &ScalarField, dt: f64) -> Vec<f64> {
    let (nx, ny, dx, dy) = (grid.nx, grid.ny, grid.dx(), grid.dy());
    let mut out = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let (u, w) = cell_velocity(v, i, j);
            let up_x = if u > 0.0 { i.saturating_sub(1) } else { (i + 1).min(nx - 1) };
            let up_y = if w > 0.0 { j.saturating_sub(1) } else { (j + 1).min(ny - 1) };
            let (cx, cy) = (u.abs() / dx, w.abs() / dy);
            out[j * nx + i] = k.get(i, j) * (1.0 / dt - cx - cy) + cx * k.get(up_x, j) + cy * k.get(i, up_y);
        }
    }
    out
}

/// Solves `(diag - d Lap_N) k = rhs` with the Neumann five-point Laplacian
/// by Gauss-Seidel sweeps from `start`. The matrix is an M-matrix, so with
/// `rhs >= 0` and `start >= 0` every iterate stays nonnegative.
fn solve_step(
    grid: &GridSpec,
    diag: &[f64],
    d: f64,
    rhs: &[f64],
    start: &[f64],
    step: usize,
) -> Result<Vec<f64>> {
    let (nx, ny) = (grid.nx, grid.ny);
    let (cx, cy) = (d / (grid.dx() * grid.dx()), d / (grid.dy() * grid.dy()));
    let mut k = start.to_vec();
    for _ in 0..MAX_SWEEPS {
        let mut change = 0.0f64;
        let mut size = 0.0f64;
        for j in 0..ny {
            for i in 0..nx {
                let c = j * nx + i;
                let mut off = 0.0;
                let mut a = diag[c];
                if i > 0 {
                    off += cx * k[c - 1];
                    a += cx;
                }
                if i + 1 < nx {
                    off += cx * k[c + 1];
                    a += cx;
                }
                if j > 0 {
                    off += cy * k[c - nx];
                    a += cy;
                }
                if j + 1 < ny {
                    off += cy * k[c + nx];
                    a += cy;
                }
                let new = (rhs[c] + off) / a;
                change = change.max((new - k[c]).abs());
                size = size.max(new.abs());
                k[c] = new;
            }
        }
        if change <= SWEEP_TOL * size || size == 0.0 {
            return Ok(k);
        }
    }
    Err(Error::StepFailure { step, message: format!("k step did not converge in {MAX_SWEEPS} sweeps") })
}

/// Integrates `k_t + v.grad k - (kappa + c0 phi) Lap k + k^2 / phi =
/// c_nu phi |D v|^2` with homogeneous Neumann conditions.
///
/// Per step: diffusion and the viscosity ratio implicit, advection (upwind),
/// source and velocity explicit, and the reaction linearized as
/// `k_old k_new / phi`. Under the advective step limit the step matrix is
/// an M-matrix with a nonnegative right-hand side, so `k >= 0` is kept.
pub fn solve_k_equation(
    grid: &GridSpec,
    phys: &PhysParams,
    v_tilde: &[VelocityField],
    phi_tilde: &[f64],
    k0: &ScalarField,
) -> Result<Vec<ScalarField>> {
    let nt = grid.nt;
    k0.check(grid)?;
    if v_tilde.len() != nt + 1 || phi_tilde.len() != nt + 1 {
        return Err(Error::Shape(format!(
            "velocity has {} and viscosity ratio {} nodes, expected {}",
            v_tilde.len(),
            phi_tilde.len(),
            nt + 1
        )));
    }
    if let Some(n) = phi_tilde.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::invalid("phi_tilde", format!("must be positive, got {} at node {n}", phi_tilde[n])));
    }
    let kmin = k0.min();
    if !(kmin >= 0.0) || !k0.all_finite() {
        return Err(Error::invalid("k0", format!("must be nonnegative and finite, min = {kmin}")));
    }
    let dt = grid.dt();
    for v in &v_tilde[..nt] {
        v.check(grid)?;
        let limit = advective_dt_limit(grid, v);
        if dt > limit {
            return Err(Error::Cfl { dt, required: limit });
        }
    }

    let mut out = Vec::with_capacity(nt + 1);
    out.push(k0.clone());
    for n in 0..nt {
        let k = &out[n];
        let (phi_old, phi_new) = (phi_tilde[n], phi_tilde[n + 1]);
        let shear = sym_gradient_norm2(grid, &v_tilde[n]);
        let mut rhs = explicit_transport(grid, &v_tilde[n], k, dt);
        for (r, s) in rhs.iter_mut().zip(shear.as_slice()) {
            *r += phys.c_nu * phi_old * s;
        }
        let diag: Vec<f64> = k.as_slice().iter().map(|kc| 1.0 / dt + kc / phi_new).collect();
        let d = phys.kappa + phys.c0 * phi_new;
        let next = solve_step(grid, &diag, d, &rhs, k.as_slice(), n + 1)?;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("k at step {}", n + 1)));
        }
        out.push(ScalarField::from_vec(grid, next)?);
    }
    Ok(out)
}
