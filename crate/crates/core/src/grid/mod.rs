//! Staggered (MAC) discretization of the rectangle `[0, lx] x [0, ly]`.
//!
//! Velocity components live on cell faces, scalars at cell centers. Every
//! operator here is linear and works on value-semantic fields.

mod field;
pub mod init;
pub mod io;
mod mask;
mod ops;
mod poisson;

pub use field::{ScalarField, SpaceTimeField, VelocityField};
pub use mask::{CellRect, RegionMask};
pub use ops::{
    cell_energy_density, convective_term, curl_norm2, divergence, gradient, grad_norm2,
    l2_dot, l2_norm, project_divergence_free, sym_gradient_norm2, vector_laplacian,
};
pub use poisson::solve_neumann_poisson;

use crate::error::{Error, Result};

/// Default tolerance on `max |div v|` for fields flagged solenoidal.
pub const DIV_TOL: f64 = 1e-10;

/// Smallest admissible cell count per direction.
pub const MIN_CELLS: usize = 4;
/// Smallest admissible number of time steps.
pub const MIN_STEPS: usize = 4;

/// Space-time grid: `nx x ny` cells on `[0, lx] x [0, ly]`, `nt` uniform
/// steps on `[0, t_final]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub nt: usize,
    pub t_final: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, nt: usize, t_final: f64) -> Result<Self> {
        if nx < MIN_CELLS {
            return Err(Error::invalid("grid.nx", format!("must be >= {MIN_CELLS}, got {nx}")));
        }
        if ny < MIN_CELLS {
            return Err(Error::invalid("grid.ny", format!("must be >= {MIN_CELLS}, got {ny}")));
        }
        if nt < MIN_STEPS {
            return Err(Error::invalid("grid.nt", format!("must be >= {MIN_STEPS}, got {nt}")));
        }
        for (name, v) in [("grid.Lx", lx), ("grid.Ly", ly), ("grid.T", t_final)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(Self { nx, ny, lx, ly, nt, t_final })
    }

    /// Unit square, `n x n` cells, `nt` steps on `[0, 1]`.
    pub fn unit(n: usize, nt: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0, nt, 1.0)
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    /// `|Omega|`.
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_ux(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn n_uy(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    /// Number of faces not lying on the boundary (the velocity unknowns).
    pub fn n_interior_faces(&self) -> usize {
        (self.nx - 1) * self.ny + self.nx * (self.ny - 1)
    }

    /// Number of nodes not lying on the boundary (stream-function unknowns).
    pub fn n_interior_nodes(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.nt).map(|n| self.time(n)).collect()
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx(), (j as f64 + 0.5) * self.dy())
    }

    /// Trapezoidal weights on the `nt + 1` time nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.nt)
            .map(|n| if n == 0 || n == self.nt { 0.5 * dt } else { dt })
            .collect()
    }

    /// Same spatial box with every resolution doubled.
    pub fn refined(&self) -> Self {
        Self { nx: 2 * self.nx, ny: 2 * self.ny, nt: 2 * self.nt, ..*self }
    }
}
