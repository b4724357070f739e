use super::GridSpec;
use crate::error::{Error, Result};

/// Cell-centered scalar, stored row-major (`j * nx + i`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    nx: usize,
    ny: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self { nx: grid.nx, ny: grid.ny, data: vec![0.0; grid.n_cells()] }
    }

    pub fn constant(grid: &GridSpec, value: f64) -> Self {
        Self { nx: grid.nx, ny: grid.ny, data: vec![value; grid.n_cells()] }
    }

    pub fn from_vec(grid: &GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.n_cells() {
            return Err(Error::Shape(format!(
                "scalar field needs {} values, got {}",
                grid.n_cells(),
                data.len()
            )));
        }
        Ok(Self { nx: grid.nx, ny: grid.ny, data })
    }

    /// Samples `f(x, y)` at cell centers.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                data.push(f(x, y));
            }
        }
        Self { nx: grid.nx, ny: grid.ny, data }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nx + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nx + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn matches(&self, grid: &GridSpec) -> bool {
        self.nx == grid.nx && self.ny == grid.ny
    }

    pub fn check(&self, grid: &GridSpec) -> Result<()> {
        if self.matches(grid) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "scalar field is {}x{}, grid is {}x{}",
                self.nx, self.ny, grid.nx, grid.ny
            )))
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// `int f dx` by the midpoint rule.
    pub fn integral(&self, grid: &GridSpec) -> f64 {
        self.data.iter().sum::<f64>() * grid.cell_area()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { nx: self.nx, ny: self.ny, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Face-centered velocity on the staggered grid.
///
/// `ux` sits on vertical faces, `(nx + 1) x ny`, index `j * (nx + 1) + i`;
/// `uy` sits on horizontal faces, `nx x (ny + 1)`, index `j * nx + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    nx: usize,
    ny: usize,
    ux: Vec<f64>,
    uy: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self { nx: grid.nx, ny: grid.ny, ux: vec![0.0; grid.n_ux()], uy: vec![0.0; grid.n_uy()] }
    }

    pub fn from_components(grid: &GridSpec, ux: Vec<f64>, uy: Vec<f64>) -> Result<Self> {
        if ux.len() != grid.n_ux() || uy.len() != grid.n_uy() {
            return Err(Error::Shape(format!(
                "velocity needs {}+{} face values, got {}+{}",
                grid.n_ux(),
                grid.n_uy(),
                ux.len(),
                uy.len()
            )));
        }
        Ok(Self { nx: grid.nx, ny: grid.ny, ux, uy })
    }

    /// Samples a vector field at the face midpoints. Boundary normal values
    /// are taken as sampled.
    pub fn from_fn(grid: &GridSpec, fx: impl Fn(f64, f64) -> f64, fy: impl Fn(f64, f64) -> f64) -> Self {
        let (dx, dy) = (grid.dx(), grid.dy());
        let mut v = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..=grid.nx {
                v.ux[j * (grid.nx + 1) + i] = fx(i as f64 * dx, (j as f64 + 0.5) * dy);
            }
        }
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                v.uy[j * grid.nx + i] = fy((i as f64 + 0.5) * dx, j as f64 * dy);
            }
        }
        v
    }

    /// Discrete curl of a nodal stream function `psi`. The result is
    /// divergence-free to rounding; it satisfies no-slip normal conditions
    /// when `psi` vanishes on the boundary.
    pub fn from_stream_function(grid: &GridSpec, psi: impl Fn(f64, f64) -> f64) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let (dx, dy) = (grid.dx(), grid.dy());
        let mut nodes = vec![0.0; (nx + 1) * (ny + 1)];
        for j in 0..=ny {
            for i in 0..=nx {
                nodes[j * (nx + 1) + i] = psi(i as f64 * dx, j as f64 * dy);
            }
        }
        Self::from_nodal_stream(grid, &nodes)
    }

    /// Same as [`VelocityField::from_stream_function`] with node values
    /// given directly, `(nx + 1) x (ny + 1)` row-major.
    pub fn from_nodal_stream(grid: &GridSpec, nodes: &[f64]) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let (dx, dy) = (grid.dx(), grid.dy());
        let node = |i: usize, j: usize| nodes[j * (nx + 1) + i];
        let mut v = Self::zeros(grid);
        for j in 0..ny {
            for i in 0..=nx {
                v.ux[j * (nx + 1) + i] = (node(i, j + 1) - node(i, j)) / dy;
            }
        }
        for j in 0..=ny {
            for i in 0..nx {
                v.uy[j * nx + i] = -(node(i + 1, j) - node(i, j)) / dx;
            }
        }
        v
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn ux(&self) -> &[f64] {
        &self.ux
    }

    pub fn uy(&self) -> &[f64] {
        &self.uy
    }

    pub fn ux_mut(&mut self) -> &mut [f64] {
        &mut self.ux
    }

    pub fn uy_mut(&mut self) -> &mut [f64] {
        &mut self.uy
    }

    pub fn ux_at(&self, i: usize, j: usize) -> f64 {
        self.ux[j * (self.nx + 1) + i]
    }

    pub fn uy_at(&self, i: usize, j: usize) -> f64 {
        self.uy[j * self.nx + i]
    }

    pub fn set_ux(&mut self, i: usize, j: usize, v: f64) {
        self.ux[j * (self.nx + 1) + i] = v;
    }

    pub fn set_uy(&mut self, i: usize, j: usize, v: f64) {
        self.uy[j * self.nx + i] = v;
    }

    pub fn matches(&self, grid: &GridSpec) -> bool {
        self.nx == grid.nx && self.ny == grid.ny
    }

    pub fn check(&self, grid: &GridSpec) -> Result<()> {
        if self.matches(grid) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "velocity field is {}x{}, grid is {}x{}",
                self.nx, self.ny, grid.nx, grid.ny
            )))
        }
    }

    /// Largest normal velocity on the boundary faces.
    pub fn boundary_normal_max(&self) -> f64 {
        let (nx, ny) = (self.nx, self.ny);
        let mut m = 0.0_f64;
        for j in 0..ny {
            m = m.max(self.ux_at(0, j).abs()).max(self.ux_at(nx, j).abs());
        }
        for i in 0..nx {
            m = m.max(self.uy_at(i, 0).abs()).max(self.uy_at(i, ny).abs());
        }
        m
    }

    /// Zeroes the normal component on the boundary.
    pub fn clear_boundary(&mut self) {
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny {
            self.set_ux(0, j, 0.0);
            self.set_ux(nx, j, 0.0);
        }
        for i in 0..nx {
            self.set_uy(i, 0, 0.0);
            self.set_uy(i, ny, 0.0);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.ux.iter().chain(&self.uy).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.ux.iter().chain(&self.uy).all(|v| v.is_finite())
    }

    pub fn scale(&mut self, a: f64) {
        self.ux.iter_mut().chain(self.uy.iter_mut()).for_each(|v| *v *= a);
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (s, o) in self.ux.iter_mut().zip(&other.ux) {
            *s += a * o;
        }
        for (s, o) in self.uy.iter_mut().zip(&other.uy) {
            *s += a * o;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Values on the interior faces, `ux` block first, each in row-major order.
    pub fn interior(&self) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut out = Vec::with_capacity((nx - 1) * ny + nx * (ny - 1));
        for j in 0..ny {
            out.extend_from_slice(&self.ux[j * (nx + 1) + 1..j * (nx + 1) + nx]);
        }
        out.extend_from_slice(&self.uy[nx..nx * ny]);
        out
    }

    /// Inverse of [`VelocityField::interior`]; boundary faces are zero.
    pub fn from_interior(grid: &GridSpec, values: &[f64]) -> Result<Self> {
        if values.len() != grid.n_interior_faces() {
            return Err(Error::Shape(format!(
                "expected {} interior face values, got {}",
                grid.n_interior_faces(),
                values.len()
            )));
        }
        let (nx, ny) = (grid.nx, grid.ny);
        let mut v = Self::zeros(grid);
        let nux = (nx - 1) * ny;
        for j in 0..ny {
            v.ux[j * (nx + 1) + 1..j * (nx + 1) + nx]
                .copy_from_slice(&values[j * (nx - 1)..(j + 1) * (nx - 1)]);
        }
        v.uy[nx..nx * ny].copy_from_slice(&values[nux..]);
        Ok(v)
    }
}

/// Cell-centered values at every time node, stored time-major
/// (`n * n_cells + cell`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    n_cells: usize,
    n_times: usize,
    data: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(n_cells: usize, n_times: usize) -> Self {
        Self { n_cells, n_times, data: vec![0.0; n_cells * n_times] }
    }

    pub fn from_fn(n_cells: usize, n_times: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_cells * n_times);
        for n in 0..n_times {
            for c in 0..n_cells {
                data.push(f(n, c));
            }
        }
        Self { n_cells, n_times, data }
    }

    /// Panics if `data.len() != n_cells * n_times`.
    pub fn from_vec(n_cells: usize, n_times: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_cells * n_times, "space-time field length");
        Self { n_cells, n_times, data }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn get(&self, n: usize, cell: usize) -> f64 {
        self.data[n * self.n_cells + cell]
    }

    pub fn at(&self, n: usize) -> &[f64] {
        &self.data[n * self.n_cells..(n + 1) * self.n_cells]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
