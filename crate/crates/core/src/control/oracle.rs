use nalgebra::{DMatrix, DVector};

use super::problem::{assemble_cost, ControlProblem, ControlSolution};
use crate::error::{Error, Result};
use crate::grid::{
    cell_energy_density, divergence, gradient, l2_norm, solve_neumann_poisson, vector_laplacian, GridSpec, ScalarField,
    VelocityField,
};
use crate::stokes::{Scheme, Trajectory, TrajectoryKind};

/// Largest optimality system the dense oracle accepts.
pub const ORACLE_MAX_UNKNOWNS: usize = 20_000;

/// Column layout of the optimality system: states `v_1..v_nt`, pressures
/// `q_1..q_nt`, controls at the active nodes, the terminal multiplier
/// `y = 2 |cell| v_T / eps_pen`, then one multiplier per constraint row.
struct Layout {
    nf: usize,
    nc: usize,
    nw: usize,
    nt: usize,
    active: usize,
}

impl Layout {
    fn v(&self, n: usize) -> usize {
        (n - 1) * self.nf
    }
    fn q(&self, n: usize) -> usize {
        self.nt * self.nf + (n - 1) * self.nc
    }
    fn u(&self, m: usize) -> usize {
        self.nt * (self.nf + self.nc) + m * self.nw
    }
    fn y(&self) -> usize {
        self.nt * (self.nf + self.nc) + self.active * self.nw
    }
    fn primal(&self) -> usize {
        self.y() + self.nf
    }
    fn rows_per_step(&self) -> usize {
        self.nf + self.nc
    }
    fn total(&self) -> usize {
        self.primal() + self.nt * self.rows_per_step()
    }
}

fn interior(v: &VelocityField) -> DVector<f64> {
    DVector::from_vec(v.interior())
}

/// Discrete operators assembled column by column from the grid stencils.
struct Operators {
    lap: DMatrix<f64>,
    grad: DMatrix<f64>,
    div: DMatrix<f64>,
}

impl Operators {
    fn new(grid: &GridSpec) -> Result<Self> {
        let nf = grid.n_interior_faces();
        let nc = grid.n_cells();
        let mut lap = DMatrix::zeros(nf, nf);
        let mut div = DMatrix::zeros(nc, nf);
        let mut unit = vec![0.0; nf];
        for f in 0..nf {
            unit[f] = 1.0;
            let e = VelocityField::from_interior(grid, &unit)?;
            lap.set_column(f, &interior(&vector_laplacian(grid, &e)));
            div.set_column(f, &DVector::from_vec(divergence(grid, &e).into_vec()));
            unit[f] = 0.0;
        }
        let mut grad = DMatrix::zeros(nf, nc);
        let mut cell = ScalarField::zeros(grid);
        for c in 0..nc {
            cell.as_mut_slice()[c] = 1.0;
            grad.set_column(c, &interior(&gradient(grid, &cell)));
            cell.as_mut_slice()[c] = 0.0;
        }
        Ok(Self { lap, grad, div })
    }
}

/// Per-face weights of a cell-weighted energy density, obtained by
/// evaluating the quadrature on unit face fields.
fn face_weights(grid: &GridSpec, cell_weight: &[f64]) -> Result<Vec<f64>> {
    let nf = grid.n_interior_faces();
    let mut unit = vec![0.0; nf];
    let mut out = Vec::with_capacity(nf);
    for f in 0..nf {
        unit[f] = 1.0;
        let e = cell_energy_density(grid, &VelocityField::from_interior(grid, &unit)?);
        out.push(e.as_slice().iter().zip(cell_weight).map(|(a, w)| a * w * w).sum::<f64>() * grid.cell_area());
        unit[f] = 0.0;
    }
    Ok(out)
}

/// Dense LU on the symmetrically equilibrated system followed by two steps
/// of iterative refinement.
fn solve_equilibrated(mut kkt: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = kkt.nrows();
    let scale: DVector<f64> = DVector::from_fn(n, |i, _| {
        let m = kkt.row(i).amax();
        if m > 0.0 {
            1.0 / m.sqrt()
        } else {
            1.0
        }
    });
    for j in 0..n {
        for i in 0..n {
            kkt[(i, j)] *= scale[i] * scale[j];
        }
    }
    let b = rhs.component_mul(&scale);
    let lu = kkt.clone().lu();
    let failed = || Error::NoConvergence { solver: "dense optimality system", iterations: 0, residual: f64::NAN };
    let mut y = lu.solve(&b).ok_or_else(failed)?;
    for _ in 0..2 {
        let r = &b - &kkt * &y;
        y += lu.solve(&r).ok_or_else(failed)?;
    }
    Ok(y.component_mul(&scale))
}

/// Solves the penalized weighted extremal problem by assembling its full
/// optimality system (state equation, adjoint equation and stationarity) in
/// physical variables and factoring it densely. Independent of the modal
/// machinery used by [`super::solve_null_control`].
pub fn dense_kkt_oracle(prob: &ControlProblem) -> Result<ControlSolution> {
    prob.validate()?;
    let g = *prob.grid();
    let scheme = prob.solver.scheme();
    let control_faces = prob.mask.interior_faces();
    let lay = Layout {
        nf: g.n_interior_faces(),
        nc: g.n_cells(),
        nw: control_faces.len(),
        nt: g.nt,
        active: prob.active_nodes(),
    };
    let total = lay.total();
    if total > ORACLE_MAX_UNKNOWNS {
        return Err(Error::TooLarge { unknowns: total, limit: ORACLE_MAX_UNKNOWNS });
    }
    let ops = Operators::new(&g)?;
    let dt = g.dt();
    let phys = prob.solver.phys();
    let mu: Vec<f64> = (0..g.nt).map(|n| phys.nu + phys.c_nu * 0.5 * (prob.phi0[n] + prob.phi0[n + 1])).collect();
    let forcing: Vec<DVector<f64>> = if prob.forcing.is_empty() {
        vec![DVector::zeros(lay.nf); g.nt + 1]
    } else {
        prob.forcing.iter().map(interior).collect()
    };
    let v0 = interior(&prob.v0);

    let np = lay.primal();
    let mut kkt = DMatrix::<f64>::zeros(total, total);
    let mut rhs = DVector::<f64>::zeros(total);

    // Hessian of the functional. The terminal penalty enters through its
    // multiplier so that small `eps_pen` does not spoil the conditioning.
    let tw = g.trapezoid_weights();
    for n in 1..=g.nt {
        let qw = face_weights(&g, prob.weights.tilde_rho.at(n))?;
        for f in 0..lay.nf {
            kkt[(lay.v(n) + f, lay.v(n) + f)] = 2.0 * tw[n] * qw[f];
        }
    }
    let compliance = prob.eps_pen / (2.0 * g.cell_area());
    for f in 0..lay.nf {
        kkt[(lay.y() + f, lay.v(g.nt) + f)] = 1.0;
        kkt[(lay.v(g.nt) + f, lay.y() + f)] = 1.0;
        kkt[(lay.y() + f, lay.y() + f)] = -compliance;
    }
    for m in 0..lay.active {
        let rw = face_weights(&g, prob.weights.eta_tilde.at(m))?;
        for (k, &f) in control_faces.iter().enumerate() {
            kkt[(lay.u(m) + k, lay.u(m) + k)] = 2.0 * tw[m] * rw[f];
        }
    }

    // Constraints, written into the lower block and mirrored.
    let constraint = |row: usize, col: usize, val: f64, kkt: &mut DMatrix<f64>| {
        kkt[(np + row, col)] += val;
        kkt[(col, np + row)] += val;
    };
    for n in 0..g.nt {
        let base = n * lay.rows_per_step();
        let (implicit, explicit) = match scheme {
            Scheme::ImplicitEuler => (mu[n], 0.0),
            Scheme::CrankNicolson => (0.5 * mu[n], 0.5 * mu[n]),
        };
        for r in 0..lay.nf {
            for c in 0..lay.nf {
                let lap = ops.lap[(r, c)];
                let diag = if r == c { 1.0 / dt } else { 0.0 };
                let new = diag - implicit * lap;
                if new != 0.0 {
                    constraint(base + r, lay.v(n + 1) + c, new, &mut kkt);
                }
                let old = diag + explicit * lap;
                if old != 0.0 {
                    if n == 0 {
                        rhs[np + base + r] += old * v0[c];
                    } else {
                        constraint(base + r, lay.v(n) + c, -old, &mut kkt);
                    }
                }
            }
            for c in 0..lay.nc {
                let gv = ops.grad[(r, c)];
                if gv != 0.0 {
                    constraint(base + r, lay.q(n + 1) + c, gv, &mut kkt);
                }
            }
            rhs[np + base + r] += match scheme {
                Scheme::ImplicitEuler => forcing[n][r],
                Scheme::CrankNicolson => 0.5 * (forcing[n][r] + forcing[n + 1][r]),
            };
        }
        let inputs: &[(usize, f64)] = match scheme {
            Scheme::ImplicitEuler => &[(n, 1.0)],
            Scheme::CrankNicolson => &[(n, 0.5), (n + 1, 0.5)],
        };
        for &(m, wgt) in inputs {
            if m < lay.active {
                for (k, &f) in control_faces.iter().enumerate() {
                    constraint(base + f, lay.u(m) + k, -wgt, &mut kkt);
                }
            }
        }
        // Divergence rows sum to zero on no-slip fields; the last is
        // replaced by a zero-mean condition on the pressure.
        for c in 0..lay.nc - 1 {
            for f in 0..lay.nf {
                let d = ops.div[(c, f)];
                if d != 0.0 {
                    constraint(base + lay.nf + c, lay.v(n + 1) + f, d, &mut kkt);
                }
            }
        }
        for c in 0..lay.nc {
            constraint(base + lay.nf + lay.nc - 1, lay.q(n + 1) + c, 1.0, &mut kkt);
        }
    }

    let sol = solve_equilibrated(kkt, &rhs)?;
    if sol.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("dense optimality system".into()));
    }

    let field = |vals: &[f64]| VelocityField::from_interior(&g, vals);
    let mut velocity = vec![prob.v0.clone()];
    let mut pressure = Vec::with_capacity(g.nt + 1);
    let force0 = if prob.forcing.is_empty() { VelocityField::zeros(&g) } else { prob.forcing[0].clone() };
    let mut control = Vec::with_capacity(g.nt + 1);
    for m in 0..=g.nt {
        let mut vals = vec![0.0; lay.nf];
        if m < lay.active {
            for (k, &f) in control_faces.iter().enumerate() {
                vals[f] = sol[lay.u(m) + k];
            }
        }
        control.push(field(&vals)?);
    }
    let mut src0 = force0;
    src0.axpy(1.0, &control[0]);
    src0.axpy(phys.viscosity(prob.phi0[0]), &vector_laplacian(&g, &prob.v0));
    pressure.push(solve_neumann_poisson(&g, &divergence(&g, &src0))?);
    for n in 1..=g.nt {
        velocity.push(field(&sol.as_slice()[lay.v(n)..lay.v(n) + lay.nf])?);
        pressure.push(ScalarField::from_vec(&g, sol.as_slice()[lay.q(n)..lay.q(n) + lay.nc].to_vec())?);
    }
    let (cost_v, cost_u) = assemble_cost(&g, &velocity, &control, &prob.weights)?;
    let final_norm = l2_norm(&g, &velocity[g.nt]);
    let penalty = final_norm * final_norm / prob.eps_pen;
    let state = Trajectory { kind: TrajectoryKind::Forward, scheme, times: g.times(), velocity, pressure };
    Ok(ControlSolution {
        control,
        state,
        cost_v,
        cost_u,
        penalty,
        final_norm,
        initial_norm: l2_norm(&g, &prob.v0),
        iterations: 0,
        converged: true,
        relative_gradient: 0.0,
        cost_history: vec![cost_v + cost_u + penalty],
    })
}

/// Size of the optimality system [`dense_kkt_oracle`] would assemble.
pub fn oracle_unknowns(prob: &ControlProblem) -> usize {
    let g = prob.grid();
    Layout {
        nf: g.n_interior_faces(),
        nc: g.n_cells(),
        nw: prob.mask.interior_faces().len(),
        nt: g.nt,
        active: prob.active_nodes(),
    }
    .total()
}
