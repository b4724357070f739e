use std::time::Instant;

use super::picard::{nonlinear_control_solve_with, NonlinearSolution, PicardInfo, PicardOptions};
use crate::control::{ControlProblem, ControlSolution, ControlWorkspace};
use crate::error::{Error, Result};
use crate::grid::{grad_norm2, l2_norm, GridSpec, ScalarField, VelocityField};
use crate::keps::{
    check_g_membership, compute_constants, integrate_phi0, solve_k_equation, DerivedConstants, GMembership,
    TurbulenceState,
};

pub const DEFAULT_FP_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_OUTER: usize = 30;
pub const DEFAULT_FINAL_TOL: f64 = 1e-3;
pub const DEFAULT_EPS_SMALL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    /// Tolerance on the combined update norm of `(v, phi0)`.
    pub fp_tol: f64,
    pub max_outer: usize,
    /// Required `|v(T)| / |v0|`.
    pub final_tol: f64,
    /// Threshold on `|grad v0|`; larger data are flagged, not rejected.
    pub eps_small: f64,
    pub picard: PicardOptions,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            fp_tol: DEFAULT_FP_TOL,
            max_outer: DEFAULT_MAX_OUTER,
            final_tol: DEFAULT_FINAL_TOL,
            eps_small: DEFAULT_EPS_SMALL,
            picard: PicardOptions::default(),
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("fixpoint.fp_tol", self.fp_tol), ("fixpoint.final_tol", self.final_tol), ("fixpoint.eps_small", self.eps_small)]
        {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.max_outer == 0 {
            return Err(Error::invalid("fixpoint.max_outer", "must be positive"));
        }
        self.picard.validate()
    }
}

/// Result of one application of the map `B`.
#[derive(Debug, Clone)]
pub struct MapOutput {
    pub k: Vec<ScalarField>,
    pub phi0: Vec<f64>,
    pub control: NonlinearSolution,
}

/// Wall-clock seconds spent per phase.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseTimes {
    pub k_equation: f64,
    pub phi0_ode: f64,
    pub control: f64,
}

impl PhaseTimes {
    fn add(&mut self, other: &PhaseTimes) {
        self.k_equation += other.k_equation;
        self.phi0_ode += other.phi0_ode;
        self.control += other.control;
    }
}

/// Applies `B` to `(v_tilde, phi_tilde)`: the kinetic energy driven by the
/// given pair, the viscosity ratio it induces, and the null control for that
/// ratio. `template` supplies everything but the viscosity ratio; its
/// initial guess, if any, warm-starts the control solve.
pub fn map_b(
    template: &ControlProblem,
    k0: &ScalarField,
    v_tilde: &[VelocityField],
    phi_tilde: &[f64],
    picard: &PicardOptions,
) -> Result<MapOutput> {
    map_b_timed(template, k0, v_tilde, phi_tilde, picard).map(|(out, _)| out)
}

fn map_b_timed(
    template: &ControlProblem,
    k0: &ScalarField,
    v_tilde: &[VelocityField],
    phi_tilde: &[f64],
    picard: &PicardOptions,
) -> Result<(MapOutput, PhaseTimes)> {
    let g = template.grid();
    let phys = template.solver.phys();
    let mut times = PhaseTimes::default();

    let clock = Instant::now();
    let k = solve_k_equation(g, phys, v_tilde, phi_tilde, k0).map_err(|e| e.in_phase("k_equation"))?;
    times.k_equation = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let phi0 = integrate_phi0(g, phys, &k).map_err(|e| e.in_phase("phi0_ode"))?;
    times.phi0_ode = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let mut prob = template.clone();
    prob.phi0 = phi0.clone();
    let control = ControlWorkspace::new(&prob)
        .and_then(|ws| nonlinear_control_solve_with(&ws, &prob, picard))
        .map_err(|e| e.in_phase("control"))?;
    times.control = clock.elapsed().as_secs_f64();
    Ok((MapOutput { k, phi0, control }, times))
}

/// One outer iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `|v_n - v_{n-1}|` in `L4(0, T; H1_0)`.
    pub velocity_update: f64,
    /// `max_t |phi_n - phi_{n-1}|`.
    pub ratio_update: f64,
    pub membership: GMembership,
    pub picard: PicardInfo,
    pub cost_v: f64,
    pub cost_u: f64,
    pub final_norm: f64,
    /// `|v(t)|` per time node.
    pub norm_v: Vec<f64>,
    /// `|grad v(t)|` per time node.
    pub norm_grad_v: Vec<f64>,
    pub phi0: Vec<f64>,
    pub times: PhaseTimes,
}

impl IterationRecord {
    pub fn residual(&self) -> f64 {
        self.velocity_update + self.ratio_update
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointReport {
    pub constants: DerivedConstants,
    pub iterations: Vec<IterationRecord>,
    /// Last residual within `fp_tol` and every iterate in the admissible set.
    pub converged: bool,
    /// `|v(T)| <= final_tol |v0|`.
    pub null_controlled: bool,
    pub final_ratio: f64,
    pub initial_norm: f64,
    /// `|grad v0|`.
    pub initial_h1: f64,
    /// `|grad v0| <= eps_small`.
    pub small_data: bool,
    pub times: PhaseTimes,
}

impl FixedPointReport {
    pub fn outer_iterations(&self) -> usize {
        self.iterations.len()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.iterations.iter().map(IterationRecord::residual).collect()
    }

    pub fn all_in_g(&self) -> bool {
        self.iterations.iter().all(|r| r.membership.is_member())
    }

    /// Converged and driven to rest.
    pub fn succeeded(&self) -> bool {
        self.converged && self.null_controlled
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointOutcome {
    pub solution: ControlSolution,
    pub turbulence: TurbulenceState,
    pub report: FixedPointReport,
}

fn h1_norm(g: &GridSpec, v: &VelocityField) -> f64 {
    grad_norm2(g, v).integral(g).max(0.0).sqrt()
}

/// `(int_0^T |grad d|^4 dt)^(1/4)` by the trapezoid rule.
fn l4_h1(g: &GridSpec, a: &[VelocityField], b: &[VelocityField]) -> f64 {
    let tw = g.trapezoid_weights();
    a.iter().zip(b).zip(&tw).map(|((x, y), w)| w * h1_norm(g, &x.sub(y)).powi(4)).sum::<f64>().powf(0.25)
}

/// Iterates `B` from `(0, phi00)` until the update norm of `(v, phi0)`
/// falls below `fp_tol` or `max_outer` is reached. Each iterate is checked
/// against the admissible set built from `k0`. Failures of a phase are
/// returned as errors; non-convergence is reported in the outcome.
pub fn fixed_point_solve(
    template: &ControlProblem,
    k0: &ScalarField,
    cfg: &FixedPointConfig,
) -> Result<FixedPointOutcome> {
    cfg.validate()?;
    template.validate()?;
    let g = *template.grid();
    let phys = *template.solver.phys();
    let constants = compute_constants(&phys, k0, g.t_final, &g)?;
    let initial_norm = l2_norm(&g, &template.v0);
    let initial_h1 = h1_norm(&g, &template.v0);

    let mut v_tilde = vec![VelocityField::zeros(&g); g.nt + 1];
    let mut phi_tilde = vec![phys.phi00; g.nt + 1];
    let mut prob = template.clone();
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut times = PhaseTimes::default();
    let mut last: Option<MapOutput> = None;
    for iteration in 1..=cfg.max_outer {
        let (out, t) = map_b_timed(&prob, k0, &v_tilde, &phi_tilde, &cfg.picard)?;
        times.add(&t);
        let sol = &out.control.solution;
        let v = &sol.state.velocity;
        let velocity_update = l4_h1(&g, v, &v_tilde);
        let ratio_update = out.phi0.iter().zip(&phi_tilde).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let membership = check_g_membership(&g, v, &out.phi0, &constants)?;
        records.push(IterationRecord {
            iteration,
            velocity_update,
            ratio_update,
            membership,
            picard: out.control.picard.clone(),
            cost_v: sol.cost_v,
            cost_u: sol.cost_u,
            final_norm: sol.final_norm,
            norm_v: v.iter().map(|f| l2_norm(&g, f)).collect(),
            norm_grad_v: v.iter().map(|f| h1_norm(&g, f)).collect(),
            phi0: out.phi0.clone(),
            times: t,
        });
        v_tilde = v.clone();
        phi_tilde = out.phi0.clone();
        prob.initial_guess = Some(sol.control.clone());
        last = Some(out);
        if velocity_update + ratio_update <= cfg.fp_tol {
            break;
        }
    }

    let out = last.expect("at least one outer iteration");
    let sol = out.control.solution;
    let residual = records.last().map_or(f64::INFINITY, IterationRecord::residual);
    let all_in_g = records.iter().all(|r| r.membership.is_member());
    let final_ratio = if initial_norm > 0.0 { sol.final_norm / initial_norm } else { 0.0 };
    let report = FixedPointReport {
        constants,
        converged: residual <= cfg.fp_tol && all_in_g,
        null_controlled: sol.final_norm <= cfg.final_tol * initial_norm,
        final_ratio,
        initial_norm,
        initial_h1,
        small_data: initial_h1 <= cfg.eps_small,
        times,
        iterations: records,
    };
    Ok(FixedPointOutcome { solution: sol, turbulence: TurbulenceState { k: out.k, phi0: out.phi0 }, report })
}
