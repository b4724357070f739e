use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{cell_energy_density, GridSpec, RegionMask, VelocityField};
use crate::stokes::{check_solenoidal, Scheme, StokesSolver, Trajectory};
use crate::weights::CarlemanWeightSet;

pub const DEFAULT_EPS_PEN: f64 = 1e-8;
pub const DEFAULT_CG_TOL: f64 = 1e-12;
pub const DEFAULT_CG_MAXIT: usize = 3000;

/// Data of the weighted extremal problem.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub solver: StokesSolver,
    /// Viscosity ratio at the time nodes.
    pub phi0: Vec<f64>,
    /// Source term per time node; empty means zero.
    pub forcing: Vec<VelocityField>,
    pub v0: VelocityField,
    /// Control region.
    pub mask: RegionMask,
    pub weights: Arc<CarlemanWeightSet>,
    /// Terminal penalty: the functional contains `|v(T)|^2 / eps_pen`.
    pub eps_pen: f64,
    pub cg_tol: f64,
    pub cg_maxit: usize,
    /// Starting control for the iteration (one field per time node).
    pub initial_guess: Option<Vec<VelocityField>>,
}

impl ControlProblem {
    pub fn new(
        solver: StokesSolver,
        phi0: Vec<f64>,
        v0: VelocityField,
        mask: RegionMask,
        weights: Arc<CarlemanWeightSet>,
    ) -> Self {
        Self {
            solver,
            phi0,
            forcing: Vec::new(),
            v0,
            mask,
            weights,
            eps_pen: DEFAULT_EPS_PEN,
            cg_tol: DEFAULT_CG_TOL,
            cg_maxit: DEFAULT_CG_MAXIT,
            initial_guess: None,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.solver.grid()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.grid();
        let nt = g.nt;
        if self.weights.grid != *g {
            return Err(Error::Shape("weights were built on a different grid".into()));
        }
        if !self.mask.matches(g) {
            return Err(Error::Shape("control mask does not match the grid".into()));
        }
        if self.phi0.len() != nt + 1 {
            return Err(Error::Shape(format!("phi0 has {} nodes, expected {}", self.phi0.len(), nt + 1)));
        }
        if !self.forcing.is_empty() && self.forcing.len() != nt + 1 {
            return Err(Error::Shape(format!("forcing has {} nodes, expected {}", self.forcing.len(), nt + 1)));
        }
        if let Some(u) = &self.initial_guess {
            if u.len() != nt + 1 {
                return Err(Error::Shape(format!("initial control has {} nodes, expected {}", u.len(), nt + 1)));
            }
        }
        if !(self.eps_pen.is_finite() && self.eps_pen > 0.0) {
            return Err(Error::invalid("control.eps_pen", format!("must be positive, got {}", self.eps_pen)));
        }
        if !(self.cg_tol.is_finite() && self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(Error::invalid("control.cg_tol", format!("must lie in (0, 1), got {}", self.cg_tol)));
        }
        if self.cg_maxit == 0 {
            return Err(Error::invalid("control.cg_maxit", "must be positive"));
        }
        check_solenoidal(g, &self.v0)
    }

    /// Time nodes carrying a control unknown. With implicit Euler the control
    /// at the last node does not influence the state and is fixed to zero.
    pub fn active_nodes(&self) -> usize {
        match self.solver.scheme() {
            Scheme::ImplicitEuler => self.grid().nt,
            Scheme::CrankNicolson => self.grid().nt + 1,
        }
    }

    /// Weighted `eta tilde`-norm squared of the source term.
    pub fn forcing_weighted_norm2(&self) -> f64 {
        if self.forcing.is_empty() {
            return 0.0;
        }
        let g = self.grid();
        let w = g.trapezoid_weights();
        self.forcing
            .iter()
            .enumerate()
            .map(|(n, f)| {
                let e = cell_energy_density(g, f);
                w[n] * e
                    .as_slice()
                    .iter()
                    .zip(self.weights.eta_tilde.at(n))
                    .map(|(a, b)| a * b * b)
                    .sum::<f64>()
                    * g.cell_area()
            })
            .sum()
    }
}

/// Result of a null-control solve.
#[derive(Debug, Clone)]
pub struct ControlSolution {
    /// Control per time node, zero outside the control region.
    pub control: Vec<VelocityField>,
    pub state: Trajectory,
    /// Weighted state cost.
    pub cost_v: f64,
    /// Weighted control cost.
    pub cost_u: f64,
    /// `|v(T)|^2 / eps_pen`.
    pub penalty: f64,
    pub final_norm: f64,
    pub initial_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `|grad J| / |grad J(0)|` at exit.
    pub relative_gradient: f64,
    /// Functional value after each iteration, starting with the initial guess.
    pub cost_history: Vec<f64>,
}

impl ControlSolution {
    pub fn objective(&self) -> f64 {
        self.cost_v + self.cost_u + self.penalty
    }

    /// `|v(T)| / |v0|`, or the absolute norm when `v0 = 0`.
    pub fn relative_final_norm(&self) -> f64 {
        if self.initial_norm > 0.0 {
            self.final_norm / self.initial_norm
        } else {
            self.final_norm
        }
    }
}

/// Weighted costs `(sum w_n int rho~^2 |v|^2, sum w_n int eta~^2 |u|^2)` with
/// trapezoidal weights in time and cell quadrature in space.
pub fn assemble_cost(
    grid: &GridSpec,
    v: &[VelocityField],
    u: &[VelocityField],
    ws: &CarlemanWeightSet,
) -> Result<(f64, f64)> {
    let nt = grid.nt;
    for (name, s) in [("state", v), ("control", u)] {
        if !s.is_empty() && s.len() != nt + 1 {
            return Err(Error::Shape(format!("{name} has {} nodes, expected {}", s.len(), nt + 1)));
        }
    }
    let w = grid.trapezoid_weights();
    let weighted = |series: &[VelocityField], weight: &crate::grid::SpaceTimeField| -> Result<f64> {
        let mut total = 0.0;
        for (n, f) in series.iter().enumerate() {
            f.check(grid)?;
            let e = cell_energy_density(grid, f);
            total += w[n] * e.as_slice().iter().zip(weight.at(n)).map(|(a, r)| a * r * r).sum::<f64>();
        }
        Ok(total * grid.cell_area())
    };
    Ok((weighted(v, &ws.tilde_rho)?, weighted(u, &ws.eta_tilde)?))
}

/// Face weights `(w_f)`: the mean of a cell weight over the two cells
/// adjacent to each interior face.
pub(crate) fn face_average(grid: &GridSpec, cell: &[f64]) -> DVector<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut out = Vec::with_capacity(grid.n_interior_faces());
    for j in 0..ny {
        for i in 1..nx {
            out.push(0.5 * (cell[j * nx + i - 1] + cell[j * nx + i]));
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            out.push(0.5 * (cell[(j - 1) * nx + i] + cell[j * nx + i]));
        }
    }
    DVector::from_vec(out)
}

/// Per-face quadratic weights of the functional, already multiplied by the
/// trapezoid weight and the cell area, one column per time node.
pub(crate) struct FaceWeights {
    /// State weight on all interior faces.
    pub state: DMatrix<f64>,
    /// Control weight on control faces.
    pub control: DMatrix<f64>,
    /// Control faces as positions in the interior-face vector.
    pub control_faces: Vec<usize>,
    /// Terminal weight `cell_area / eps_pen`.
    pub terminal: f64,
}

impl FaceWeights {
    pub fn new(prob: &ControlProblem) -> Self {
        let g = prob.grid();
        let ws = &prob.weights;
        let tw = g.trapezoid_weights();
        let area = g.cell_area();
        let control_faces = prob.mask.interior_faces();
        let nf = g.n_interior_faces();
        let mut state = DMatrix::zeros(nf, g.nt + 1);
        let mut control = DMatrix::zeros(control_faces.len(), g.nt + 1);
        for n in 0..=g.nt {
            let rho2: Vec<f64> = ws.tilde_rho.at(n).iter().map(|r| r * r).collect();
            let eta2: Vec<f64> = ws.eta_tilde.at(n).iter().map(|r| r * r).collect();
            let q = face_average(g, &rho2) * (tw[n] * area);
            let r = face_average(g, &eta2) * (tw[n] * area);
            state.set_column(n, &q);
            for (k, &f) in control_faces.iter().enumerate() {
                control[(k, n)] = r[f];
            }
        }
        Self { state, control, control_faces, terminal: area / prob.eps_pen }
    }
}
