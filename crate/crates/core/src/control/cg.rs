use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use super::problem::{assemble_cost, ControlProblem, ControlSolution, FaceWeights};
use super::riccati::{ModalLq, RiccatiPreconditioner};
use crate::error::{Error, Result};
use crate::grid::{l2_norm, GridSpec, VelocityField};
use crate::stokes::{Scheme, StokesSolver};

/// Data of a control problem that does not depend on the initial state,
/// the source term or the starting control, together with the lazily built
/// preconditioner. Reusing one workspace across solves that differ only in
/// those inputs skips the preconditioner setup.
pub struct ControlWorkspace {
    fw: FaceWeights,
    mu: Vec<f64>,
    /// Modal basis restricted to control faces.
    e_omega: DMatrix<f64>,
    active: usize,
    key: WorkspaceKey,
    precond: OnceLock<Preconditioner>,
}

#[derive(Debug, Clone, PartialEq)]
struct WorkspaceKey {
    grid: GridSpec,
    scheme: Scheme,
    phi0: Vec<f64>,
    eps_pen: f64,
    mask: Vec<bool>,
    weights: usize,
}

impl WorkspaceKey {
    fn of(prob: &ControlProblem) -> Self {
        Self {
            grid: *prob.grid(),
            scheme: prob.solver.scheme(),
            phi0: prob.phi0.clone(),
            eps_pen: prob.eps_pen,
            mask: prob.mask.cells().to_vec(),
            weights: Arc::as_ptr(&prob.weights) as usize,
        }
    }
}

impl ControlWorkspace {
    pub fn new(prob: &ControlProblem) -> Result<Self> {
        prob.validate()?;
        let fw = FaceWeights::new(prob);
        let mu = prob.solver.viscosities(&prob.phi0)?;
        let modes = &prob.solver.basis().modes;
        let e_omega = DMatrix::from_fn(fw.control_faces.len(), modes.ncols(), |r, c| modes[(fw.control_faces[r], c)]);
        Ok(Self {
            fw,
            mu,
            e_omega,
            active: prob.active_nodes(),
            key: WorkspaceKey::of(prob),
            precond: OnceLock::new(),
        })
    }

    /// Whether `prob` differs from the problem this workspace was built for
    /// only in initial state, source term, tolerances and starting control.
    pub fn fits(&self, prob: &ControlProblem) -> bool {
        self.key == WorkspaceKey::of(prob)
    }

    /// Same as [`solve_null_control`], reusing the cached setup.
    pub fn solve(&self, prob: &ControlProblem) -> Result<ControlSolution> {
        if !self.fits(prob) {
            return Err(Error::Shape("control workspace was built for a different problem".into()));
        }
        prob.validate()?;
        let rp = ReducedProblem { prob, ws: self };
        let g = prob.grid();
        let x0 = match &prob.initial_guess {
            Some(u) => rp.stack_fields(u),
            None => DMatrix::zeros(rp.n_faces(), g.nt + 1),
        };
        let out = pcg(&rp, x0, prob.cg_tol, prob.cg_maxit)?;
        if out.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("control iterate".into()));
        }
        let control = rp.to_fields(&out.x)?;
        finish(prob, control, out.iterations, out.converged, out.relative_gradient, out.history)
    }

    fn preconditioner(&self, solver: &StokesSolver) -> Result<&Preconditioner> {
        if let Some(p) = self.precond.get() {
            return Ok(p);
        }
        let ric = RiccatiPreconditioner::new(&ModalLq {
            scheme: solver.scheme(),
            dt: solver.grid().dt(),
            e_omega: &self.e_omega,
            modes: &solver.basis().modes,
            coefficients: &solver.step_coefficients(&self.mu),
            state: &self.fw.state,
            control: &self.fw.control,
            terminal: self.fw.terminal,
        })?;
        Ok(self.precond.get_or_init(|| Preconditioner(ric)))
    }
}

/// Reduced quadratic functional `J(u) = c - b.u + u.H u / 2` in modal
/// coordinates, with controls stored as control-face values per node.
struct ReducedProblem<'a> {
    prob: &'a ControlProblem,
    ws: &'a ControlWorkspace,
}

impl ReducedProblem<'_> {
    fn n_faces(&self) -> usize {
        self.ws.fw.control_faces.len()
    }

    fn modal_state(&self, a0: &DVector<f64>, u: &DMatrix<f64>, f_hat: Option<&DMatrix<f64>>) -> DMatrix<f64> {
        let mut g = self.ws.e_omega.tr_mul(u);
        if let Some(f) = f_hat {
            g += f;
        }
        self.prob.solver.forward_modal(&self.ws.mu, a0, Some(&g))
    }

    /// Gradient of the state part of `J` with respect to the control.
    fn state_gradient(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let solver = &self.prob.solver;
        let basis = solver.basis();
        let nt = solver.grid().nt;
        let dt = solver.grid().dt();
        let mut mv = basis.expand(a);
        mv.column_mut(0).fill(0.0);
        for n in 1..=nt {
            let mut col = mv.column_mut(n);
            col.component_mul_assign(&self.ws.fw.state.column(n));
            col *= 2.0 / dt;
        }
        let f_hat = basis.project(&mv);
        let phi_t = a.column(nt) * (2.0 * self.ws.fw.terminal);
        let (_, sens, _) = solver.adjoint_modal(&self.ws.mu, &phi_t, Some(&f_hat));
        let mut grad = (&self.ws.e_omega * sens) * dt;
        self.mask_inactive(&mut grad);
        grad
    }

    fn mask_inactive(&self, m: &mut DMatrix<f64>) {
        for n in self.ws.active..m.ncols() {
            m.column_mut(n).fill(0.0);
        }
    }

    /// `H p` and the modal state driven by `p` from rest.
    fn apply(&self, p: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let nm = self.prob.solver.basis().n_modes();
        let a = self.modal_state(&DVector::zeros(nm), p, None);
        let mut hp = self.state_gradient(&a);
        hp += p.component_mul(&self.ws.fw.control) * 2.0;
        self.mask_inactive(&mut hp);
        (hp, a)
    }

    /// Value, gradient and modal state at `x`, evaluated directly from the
    /// state driven by `x` rather than from the affine decomposition.
    fn evaluate(&self, x: &DMatrix<f64>) -> (f64, DMatrix<f64>, DMatrix<f64>) {
        let prob = self.prob;
        let solver = &prob.solver;
        let basis = solver.basis();
        let g = solver.grid();
        let a0 = basis.modes.tr_mul(&DVector::from_vec(prob.v0.interior()));
        let f_hat = if prob.forcing.is_empty() {
            None
        } else {
            let mut f = DMatrix::zeros(g.n_interior_faces(), g.nt + 1);
            for (n, fld) in prob.forcing.iter().enumerate() {
                f.set_column(n, &DVector::from_vec(fld.interior()));
            }
            Some(basis.project(&f))
        };
        let a = self.modal_state(&a0, x, f_hat.as_ref());
        let mut grad = self.state_gradient(&a);
        grad += x.component_mul(&self.ws.fw.control) * 2.0;
        self.mask_inactive(&mut grad);
        (self.value(&a, x), grad, a)
    }

    /// `J` from the modal state `a` of the control `x`. Every term is
    /// nonnegative, so there is no cancellation.
    fn value(&self, a: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
        let fw = &self.ws.fw;
        let nt = self.prob.grid().nt;
        let v = self.prob.solver.basis().expand(a);
        let mut value = 0.0;
        for n in 0..=nt {
            value += v.column(n).component_mul(&v.column(n)).dot(&fw.state.column(n));
        }
        value += x.component_mul(x).component_mul(&fw.control).sum();
        value + fw.terminal * a.column(nt).norm_squared()
    }

    fn to_fields(&self, u: &DMatrix<f64>) -> Result<Vec<VelocityField>> {
        let g = self.prob.grid();
        (0..=g.nt)
            .map(|n| {
                let mut vals = vec![0.0; g.n_interior_faces()];
                for (k, &f) in self.ws.fw.control_faces.iter().enumerate() {
                    vals[f] = u[(k, n)];
                }
                VelocityField::from_interior(g, &vals)
            })
            .collect()
    }

    fn stack_fields(&self, u: &[VelocityField]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_faces(), u.len());
        for (n, f) in u.iter().enumerate() {
            let vals = f.interior();
            for (k, &face) in self.ws.fw.control_faces.iter().enumerate() {
                m[(k, n)] = vals[face];
            }
        }
        self.mask_inactive(&mut m);
        m
    }
}

struct Preconditioner(RiccatiPreconditioner);

impl Preconditioner {
    fn apply(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        self.0.apply(r)
    }
}

fn dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Outcome of the conjugate-gradient solve.
struct CgOutcome {
    x: DMatrix<f64>,
    iterations: usize,
    converged: bool,
    relative_gradient: f64,
    history: Vec<f64>,
}

/// Refinement rounds with a freshly evaluated gradient.
const MAX_ROUNDS: usize = 8;

/// Preconditioned CG on `H d = r` at the point `x` with modal state `a`,
/// appending `J(x + d_k)` to `history`. Stops when the preconditioned
/// residual norm `sqrt(r.M r)` falls to `target`.
#[allow(clippy::too_many_arguments)]
fn pcg_correction(
    rp: &ReducedProblem,
    minv: &Preconditioner,
    r0: &DMatrix<f64>,
    x: &DMatrix<f64>,
    a: &DMatrix<f64>,
    target: f64,
    budget: usize,
    history: &mut Vec<f64>,
) -> (DMatrix<f64>, usize) {
    let mut d = DMatrix::zeros(r0.nrows(), r0.ncols());
    let mut ad = DMatrix::zeros(a.nrows(), a.ncols());
    let mut r = r0.clone();
    let mut z = minv.apply(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    while rz.max(0.0).sqrt() > target && iterations < budget {
        let (hp, ap) = rp.apply(&p);
        let curv = dot(&p, &hp);
        if !(curv > 0.0) {
            break;
        }
        let alpha = rz / curv;
        d += &p * alpha;
        ad += &ap * alpha;
        r -= &hp * alpha;
        z = minv.apply(&r);
        let rz_new = dot(&r, &z);
        p = &z + &p * (rz_new / rz);
        rz = rz_new;
        iterations += 1;
        history.push(rp.value(&(a + &ad), &(x + &d)));
    }
    (d, iterations)
}

/// Minimizes `J` by conjugate gradients wrapped in iterative refinement:
/// each round recomputes the true gradient by a forward and an adjoint solve
/// and runs preconditioned CG on the correction. The recursive CG residual
/// drifts from the true one in the directions dominated by the terminal
/// penalty; the refinement removes that drift.
///
/// Gradients are measured in the dual norm `sqrt(g.M g)` of the
/// preconditioner `M`. The Euclidean norm is dominated by the stiff terminal
/// directions and says little about the error in the control.
fn pcg(rp: &ReducedProblem, x0: DMatrix<f64>, tol: f64, maxit: usize) -> Result<CgOutcome> {
    let zero = DMatrix::zeros(x0.nrows(), x0.ncols());
    let b = rp.evaluate(&zero).1;
    let mut x = x0;
    let (value, mut grad, mut a) = rp.evaluate(&x);
    let mut history = vec![value];
    if b.norm() == 0.0 {
        if x.norm() != 0.0 {
            x = zero;
            history.push(0.0);
        }
        return Ok(CgOutcome { x, iterations: 0, converged: true, relative_gradient: 0.0, history });
    }
    let minv = rp.ws.preconditioner(&rp.prob.solver)?;
    let dual = |g: &DMatrix<f64>| dot(g, &minv.apply(g)).max(0.0).sqrt();
    let bnorm = dual(&b);
    let target = tol * bnorm;
    let mut gnorm = dual(&grad);
    let mut iterations = 0;
    for _ in 0..MAX_ROUNDS {
        if gnorm <= target || iterations >= maxit {
            break;
        }
        let r = -&grad;
        let (d, it) = pcg_correction(rp, minv, &r, &x, &a, target, maxit - iterations, &mut history);
        iterations += it;
        if it == 0 {
            break;
        }
        x += d;
        let value;
        (value, grad, a) = rp.evaluate(&x);
        // the refreshed value replaces the last in-round one
        if let Some(last) = history.last_mut() {
            *last = value;
        }
        gnorm = dual(&grad);
    }
    let relative_gradient = gnorm / bnorm;
    Ok(CgOutcome { x, iterations, converged: relative_gradient <= tol, relative_gradient, history })
}

/// Minimizes the penalized weighted functional over controls supported in
/// the control region by preconditioned conjugate gradients. The gradient
/// comes from the exact discrete adjoint. Failure to reach `cg_tol` within
/// `cg_maxit` iterations is reported through `converged = false`.
pub fn solve_null_control(prob: &ControlProblem) -> Result<ControlSolution> {
    ControlWorkspace::new(prob)?.solve(prob)
}

fn finish(
    prob: &ControlProblem,
    control: Vec<VelocityField>,
    iterations: usize,
    converged: bool,
    relative_gradient: f64,
    cost_history: Vec<f64>,
) -> Result<ControlSolution> {
    let g = prob.grid();
    let state = prob.solver.solve_forward(&prob.phi0, &prob.forcing, &control, &prob.v0, &prob.mask)?;
    let (cost_v, cost_u) = assemble_cost(g, &state.velocity, &control, &prob.weights)?;
    let final_norm = l2_norm(g, state.last());
    let penalty = final_norm * final_norm / prob.eps_pen;
    Ok(ControlSolution {
        control,
        cost_v,
        cost_u,
        penalty,
        final_norm,
        initial_norm: l2_norm(g, &prob.v0),
        iterations,
        converged,
        relative_gradient,
        cost_history,
        state,
    })
}
