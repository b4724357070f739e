//! Orthonormal eigenbasis of the discrete Stokes operator.
//!
//! Divergence-free face fields with no-slip normal values are exactly the
//! discrete curls of stream functions on interior nodes. The curls of the
//! nodal sine modes are orthogonal, so after normalization they form an
//! orthonormal basis of that subspace; diagonalizing the restricted vector
//! Laplacian in it yields the modal basis used for time stepping.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{vector_laplacian, GridSpec, VelocityField};

#[derive(Debug)]
pub struct ModalBasis {
    /// Interior-face values of each mode (columns), Euclidean-orthonormal.
    pub modes: DMatrix<f64>,
    /// Eigenvalues of `-Laplacian` per mode, ascending.
    pub eigenvalues: DVector<f64>,
}

type Key = (usize, usize, u64, u64);

fn cache() -> &'static Mutex<HashMap<Key, Arc<ModalBasis>>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<ModalBasis>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached per spatial grid; the first call for a grid builds it.
pub fn modal_basis(grid: &GridSpec) -> Result<Arc<ModalBasis>> {
    let key = (grid.nx, grid.ny, grid.lx.to_bits(), grid.ly.to_bits());
    if let Some(b) = cache().lock().expect("basis cache poisoned").get(&key) {
        return Ok(Arc::clone(b));
    }
    let basis = Arc::new(build(grid)?);
    cache().lock().expect("basis cache poisoned").insert(key, Arc::clone(&basis));
    Ok(basis)
}

fn build(grid: &GridSpec) -> Result<ModalBasis> {
    let (nx, ny) = (grid.nx, grid.ny);
    let nf = grid.n_interior_faces();
    let nm = grid.n_interior_nodes();

    let mut q = DMatrix::<f64>::zeros(nf, nm);
    let mut lq = DMatrix::<f64>::zeros(nf, nm);
    let mut nodes = vec![0.0; (nx + 1) * (ny + 1)];
    let mut col = 0;
    for l in 1..ny {
        for k in 1..nx {
            for j in 0..=ny {
                for i in 0..=nx {
                    nodes[j * (nx + 1) + i] =
                        (PI * (k * i) as f64 / nx as f64).sin() * (PI * (l * j) as f64 / ny as f64).sin();
                }
            }
            let v = VelocityField::from_nodal_stream(grid, &nodes);
            let lap = vector_laplacian(grid, &v);
            let vi = v.interior();
            let norm = vi.iter().map(|x| x * x).sum::<f64>().sqrt();
            for (r, (a, b)) in vi.iter().zip(lap.interior()).enumerate() {
                q[(r, col)] = a / norm;
                lq[(r, col)] = -b / norm;
            }
            col += 1;
        }
    }
    let mut m = q.transpose() * &lq;
    // symmetrize rounding
    let mt = m.transpose();
    m += mt;
    m *= 0.5;
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..nm).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(nm, order.iter().map(|&i| eig.eigenvalues[i]));
    let vecs = DMatrix::from_fn(nm, nm, |r, c| eig.eigenvectors[(r, order[c])]);
    if eigenvalues.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
        return Err(Error::NonFinite("Stokes eigenvalues".into()));
    }
    Ok(ModalBasis { modes: q * vecs, eigenvalues })
}

impl ModalBasis {
    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Modal coefficients of a set of interior-face columns.
    pub fn project(&self, faces: &DMatrix<f64>) -> DMatrix<f64> {
        self.modes.tr_mul(faces)
    }

    /// Interior-face values from modal coefficients.
    pub fn expand(&self, coeffs: &DMatrix<f64>) -> DMatrix<f64> {
        &self.modes * coeffs
    }
}
