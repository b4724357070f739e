use nalgebra::DMatrix;

use super::{GridSpec, ScalarField};
use crate::error::{Error, Result};

/// Orthonormal DCT-II basis, rows indexed by mode.
fn dct_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |k, i| {
        let s = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        s * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n as f64).cos()
    })
}

/// Eigenvalues of the 1-D cell-centered Neumann second difference (<= 0).
fn neumann_eigs(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| -(2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos()) / (h * h))
        .collect()
}

/// Solves `div grad p = f` with homogeneous Neumann conditions, i.e. the
/// operator [`super::divergence`] composed with [`super::gradient`]. The
/// mean of `f` is discarded and `p` is returned with zero mean.
///
/// The operator is diagonal in the cosine basis, so the solve is direct.
pub fn solve_neumann_poisson(grid: &GridSpec, f: &ScalarField) -> Result<ScalarField> {
    f.check(grid)?;
    if !f.all_finite() {
        return Err(Error::NonFinite("poisson right-hand side".into()));
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let cx = dct_matrix(nx);
    let cy = dct_matrix(ny);
    let ex = neumann_eigs(nx, grid.dx());
    let ey = neumann_eigs(ny, grid.dy());
    // rows = y, columns = x
    let rhs = DMatrix::from_row_slice(ny, nx, f.as_slice());
    let mut hat = &cy * rhs * cx.transpose();
    for l in 0..ny {
        for k in 0..nx {
            hat[(l, k)] = if k == 0 && l == 0 { 0.0 } else { hat[(l, k)] / (ex[k] + ey[l]) };
        }
    }
    let p = cy.transpose() * hat * &cx;
    let mut data = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            data.push(p[(j, i)]);
        }
    }
    ScalarField::from_vec(grid, data)
}
