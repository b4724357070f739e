use super::{GridSpec, ScalarField};
use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]` in physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl CellRect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(
                "region",
                format!("empty or non-finite rectangle [{x0}, {x1}] x [{y0}, {y1}]"),
            ));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Set of cells, selected by their centers.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    nx: usize,
    ny: usize,
    cells: Vec<bool>,
}

impl RegionMask {
    /// Cells whose centers lie in the closed rectangle. Fails if no cell is
    /// selected.
    pub fn from_rect(grid: &GridSpec, rect: CellRect) -> Result<Self> {
        Self::from_predicate(grid, |x, y| rect.contains(x, y))
    }

    pub fn from_predicate(grid: &GridSpec, inside: impl Fn(f64, f64) -> bool) -> Result<Self> {
        let mut cells = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                cells.push(inside(x, y));
            }
        }
        if !cells.iter().any(|&c| c) {
            return Err(Error::invalid("region", "selects no cell at this resolution"));
        }
        Ok(Self { nx: grid.nx, ny: grid.ny, cells })
    }

    pub fn full(grid: &GridSpec) -> Self {
        Self { nx: grid.nx, ny: grid.ny, cells: vec![true; grid.n_cells()] }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.nx + i]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn matches(&self, grid: &GridSpec) -> bool {
        self.nx == grid.nx && self.ny == grid.ny
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }

    /// 1 inside, 0 outside.
    pub fn indicator(&self, grid: &GridSpec) -> ScalarField {
        let data = self.cells.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
        ScalarField::from_vec(grid, data).expect("mask shape matches grid")
    }

    /// Whether a cell touches the boundary of the domain or of the complement
    /// of the region (used for "compactly inside" checks).
    pub fn touches_domain_boundary(&self) -> bool {
        (0..self.ny).any(|j| (0..self.nx).any(|i| {
            self.contains(i, j) && (i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny)
        }))
    }

    /// Positions, within the interior-face vector (see
    /// [`super::VelocityField::interior`]), of faces whose two adjacent
    /// cells both belong to the region.
    pub fn interior_faces(&self) -> Vec<usize> {
        let (nx, ny) = (self.nx, self.ny);
        let mut out = Vec::new();
        for j in 0..ny {
            for i in 1..nx {
                if self.contains(i - 1, j) && self.contains(i, j) {
                    out.push(j * (nx - 1) + (i - 1));
                }
            }
        }
        let off = (nx - 1) * ny;
        for j in 1..ny {
            for i in 0..nx {
                if self.contains(i, j - 1) && self.contains(i, j) {
                    out.push(off + (j - 1) * nx + i);
                }
            }
        }
        out
    }
}
