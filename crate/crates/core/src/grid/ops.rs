use super::{solve_neumann_poisson, GridSpec, ScalarField, VelocityField};
use crate::error::{Error, Result};

/// Cell-centered divergence.
pub fn divergence(grid: &GridSpec, v: &VelocityField) -> ScalarField {
    let (nx, ny, dx, dy) = (grid.nx, grid.ny, grid.dx(), grid.dy());
    let mut out = ScalarField::zeros(grid);
    let d = out.as_mut_slice();
    for j in 0..ny {
        for i in 0..nx {
            d[j * nx + i] = (v.ux_at(i + 1, j) - v.ux_at(i, j)) / dx
                + (v.uy_at(i, j + 1) - v.uy_at(i, j)) / dy;
        }
    }
    out
}

/// Face-centered gradient; zero on boundary faces. This is minus the
/// L2-adjoint of [`divergence`] restricted to no-slip fields.
pub fn gradient(grid: &GridSpec, p: &ScalarField) -> VelocityField {
    let (nx, ny, dx, dy) = (grid.nx, grid.ny, grid.dx(), grid.dy());
    let mut g = VelocityField::zeros(grid);
    for j in 0..ny {
        for i in 1..nx {
            g.set_ux(i, j, (p.get(i, j) - p.get(i - 1, j)) / dx);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            g.set_uy(i, j, (p.get(i, j) - p.get(i, j - 1)) / dy);
        }
    }
    g
}

/// Five-point Laplacian of each component on interior faces. Tangential
/// no-slip enters through a ghost value mirrored across the wall; boundary
/// faces of the result are zero.
pub fn vector_laplacian(grid: &GridSpec, v: &VelocityField) -> VelocityField {
    let (nx, ny) = (grid.nx, grid.ny);
    let (rdx2, rdy2) = (1.0 / (grid.dx() * grid.dx()), 1.0 / (grid.dy() * grid.dy()));
    let mut out = VelocityField::zeros(grid);
    for j in 0..ny {
        for i in 1..nx {
            let c = v.ux_at(i, j);
            let s = if j == 0 { -c } else { v.ux_at(i, j - 1) };
            let n = if j + 1 == ny { -c } else { v.ux_at(i, j + 1) };
            let val = (v.ux_at(i + 1, j) - 2.0 * c + v.ux_at(i - 1, j)) * rdx2 + (n - 2.0 * c + s) * rdy2;
            out.set_ux(i, j, val);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let c = v.uy_at(i, j);
            let w = if i == 0 { -c } else { v.uy_at(i - 1, j) };
            let e = if i + 1 == nx { -c } else { v.uy_at(i + 1, j) };
            let val = (e - 2.0 * c + w) * rdx2 + (v.uy_at(i, j + 1) - 2.0 * c + v.uy_at(i, j - 1)) * rdy2;
            out.set_uy(i, j, val);
        }
    }
    out
}

/// Nodal `d ux / dy` and `d uy / dx`, `(nx + 1) x (ny + 1)`, with mirrored
/// ghosts at the walls.
fn nodal_shear(grid: &GridSpec, v: &VelocityField) -> (Vec<f64>, Vec<f64>) {
    let (nx, ny, dx, dy) = (grid.nx, grid.ny, grid.dx(), grid.dy());
    let mut duy = vec![0.0; (nx + 1) * (ny + 1)];
    let mut dvx = vec![0.0; (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            let below = if j == 0 { -v.ux_at(i, 0) } else { v.ux_at(i, j - 1) };
            let above = if j == ny { -v.ux_at(i, ny - 1) } else { v.ux_at(i, j) };
            duy[j * (nx + 1) + i] = (above - below) / dy;
            let left = if i == 0 { -v.uy_at(0, j) } else { v.uy_at(i - 1, j) };
            let right = if i == nx { -v.uy_at(nx - 1, j) } else { v.uy_at(i, j) };
            dvx[j * (nx + 1) + i] = (right - left) / dx;
        }
    }
    (duy, dvx)
}

fn node_avg(grid: &GridSpec, nodal: &[f64], i: usize, j: usize, f: impl Fn(f64) -> f64) -> f64 {
    let w = grid.nx + 1;
    0.25 * (f(nodal[j * w + i]) + f(nodal[j * w + i + 1]) + f(nodal[(j + 1) * w + i]) + f(nodal[(j + 1) * w + i + 1]))
}

/// `|D v|^2 = |grad v + grad v^T|^2` at cell centers. Normal strains are
/// taken at cell centers, shear at nodes (squared, then averaged).
pub fn sym_gradient_norm2(grid: &GridSpec, v: &VelocityField) -> ScalarField {
    let (nx, ny, dx, dy) = (grid.nx, grid.ny, grid.dx(), grid.dy());
    let (duy, dvx) = nodal_shear(grid, v);
    let shear: Vec<f64> = duy.iter().zip(&dvx).map(|(a, b)| a + b).collect();
    ScalarField::from_vec(
        grid,
        (0..ny)
            .flat_map(|j| (0..nx).map(move |i| (i, j)))
            .map(|(i, j)| {
                let exx = (v.ux_at(i + 1, j) - v.ux_at(i, j)) / dx;
                let eyy = (v.uy_at(i, j + 1) - v.uy_at(i, j)) / dy;
                4.0 * exx * exx + 4.0 * eyy * eyy + 2.0 * node_avg(grid, &shear, i, j, |s| s * s)
            })
            .collect(),
    )
    .expect("shape")
}

/// `|grad v|^2` at cell centers.
pub fn grad_norm2(grid: &GridSpec, v: &VelocityField) -> ScalarField {
    let (nx, ny, dx, dy) = (grid.nx, grid.ny, grid.dx(), grid.dy());
    let (duy, dvx) = nodal_shear(grid, v);
    ScalarField::from_vec(
        grid,
        (0..ny)
            .flat_map(|j| (0..nx).map(move |i| (i, j)))
            .map(|(i, j)| {
                let exx = (v.ux_at(i + 1, j) - v.ux_at(i, j)) / dx;
                let eyy = (v.uy_at(i, j + 1) - v.uy_at(i, j)) / dy;
                exx * exx
                    + eyy * eyy
                    + node_avg(grid, &duy, i, j, |s| s * s)
                    + node_avg(grid, &dvx, i, j, |s| s * s)
            })
            .collect(),
    )
    .expect("shape")
}

/// Squared vorticity at cell centers.
pub fn curl_norm2(grid: &GridSpec, v: &VelocityField) -> ScalarField {
    let (duy, dvx) = nodal_shear(grid, v);
    let curl: Vec<f64> = duy.iter().zip(&dvx).map(|(a, b)| b - a).collect();
    ScalarField::from_vec(
        grid,
        (0..grid.ny)
            .flat_map(|j| (0..grid.nx).map(move |i| (i, j)))
            .map(|(i, j)| node_avg(grid, &curl, i, j, |s| s * s))
            .collect(),
    )
    .expect("shape")
}

/// `|v|^2` at cell centers, averaging the squares of the two faces per
/// component.
pub fn cell_energy_density(grid: &GridSpec, v: &VelocityField) -> ScalarField {
    ScalarField::from_vec(
        grid,
        (0..grid.ny)
            .flat_map(|j| (0..grid.nx).map(move |i| (i, j)))
            .map(|(i, j)| {
                0.5 * (v.ux_at(i, j).powi(2) + v.ux_at(i + 1, j).powi(2))
                    + 0.5 * (v.uy_at(i, j).powi(2) + v.uy_at(i, j + 1).powi(2))
            })
            .collect(),
    )
    .expect("shape")
}

/// L2 inner product consistent with [`cell_energy_density`]: interior faces
/// carry weight `dx dy`, boundary faces half of it.
pub fn l2_dot(grid: &GridSpec, a: &VelocityField, b: &VelocityField) -> f64 {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut s = 0.0;
    for j in 0..ny {
        for i in 0..=nx {
            let w = if i == 0 || i == nx { 0.5 } else { 1.0 };
            s += w * a.ux_at(i, j) * b.ux_at(i, j);
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            let w = if j == 0 || j == ny { 0.5 } else { 1.0 };
            s += w * a.uy_at(i, j) * b.uy_at(i, j);
        }
    }
    s * grid.cell_area()
}

pub fn l2_norm(grid: &GridSpec, v: &VelocityField) -> f64 {
    l2_dot(grid, v, v).sqrt()
}

/// `(v . grad) v` on interior faces with centered differences; the
/// transverse velocity is averaged from the four surrounding faces.
pub fn convective_term(grid: &GridSpec, v: &VelocityField) -> VelocityField {
    let (nx, ny, dx, dy) = (grid.nx, grid.ny, grid.dx(), grid.dy());
    let mut out = VelocityField::zeros(grid);
    for j in 0..ny {
        for i in 1..nx {
            let u = v.ux_at(i, j);
            let vt = 0.25 * (v.uy_at(i - 1, j) + v.uy_at(i, j) + v.uy_at(i - 1, j + 1) + v.uy_at(i, j + 1));
            let s = if j == 0 { -u } else { v.ux_at(i, j - 1) };
            let n = if j + 1 == ny { -u } else { v.ux_at(i, j + 1) };
            let dudx = (v.ux_at(i + 1, j) - v.ux_at(i - 1, j)) / (2.0 * dx);
            let dudy = (n - s) / (2.0 * dy);
            out.set_ux(i, j, u * dudx + vt * dudy);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let w = v.uy_at(i, j);
            let ut = 0.25 * (v.ux_at(i, j - 1) + v.ux_at(i + 1, j - 1) + v.ux_at(i, j) + v.ux_at(i + 1, j));
            let west = if i == 0 { -w } else { v.uy_at(i - 1, j) };
            let east = if i + 1 == nx { -w } else { v.uy_at(i + 1, j) };
            let dwdx = (east - west) / (2.0 * dx);
            let dwdy = (v.uy_at(i, j + 1) - v.uy_at(i, j - 1)) / (2.0 * dy);
            out.set_uy(i, j, ut * dwdx + w * dwdy);
        }
    }
    out
}

/// Discrete Leray projection: `v - grad p` with `div grad p = div v`.
/// The input must have zero normal velocity on the boundary.
pub fn project_divergence_free(grid: &GridSpec, v: &VelocityField) -> Result<VelocityField> {
    v.check(grid)?;
    let bn = v.boundary_normal_max();
    if bn > 0.0 {
        return Err(Error::invalid(
            "velocity",
            format!("normal boundary velocity must vanish, found {bn:e}"),
        ));
    }
    let div = divergence(grid, v);
    let p = solve_neumann_poisson(grid, &div)?;
    let mut out = v.clone();
    out.axpy(-1.0, &gradient(grid, &p));
    Ok(out)
}
