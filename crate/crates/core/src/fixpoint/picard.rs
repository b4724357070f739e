use crate::control::{source_weighted_norm2, ControlProblem, ControlSolution, ControlWorkspace};
use crate::error::{Error, Result};
use crate::grid::{convective_term, VelocityField};

pub const DEFAULT_PICARD_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_PICARD: usize = 25;
/// Consecutive residual increases taken as divergence.
pub const DIVERGENCE_STREAK: usize = 3;

/// How the convective term is treated inside the fixed-point map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerMode {
    /// Picard iteration on the source `-(v . grad) v`.
    #[default]
    Nonlinear,
    /// One linear solve with zero source.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    /// Stop when the weighted source update is at most `tol` times the
    /// weighted source.
    pub tol: f64,
    pub max_iter: usize,
    pub mode: InnerMode,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_PICARD_TOL, max_iter: DEFAULT_MAX_PICARD, mode: InnerMode::Nonlinear }
    }
}

impl PicardOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::invalid("fixpoint.picard_tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("fixpoint.max_picard", "must be positive"));
        }
        Ok(())
    }
}

/// Iteration record of the inner solve.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PicardInfo {
    /// Control solves performed.
    pub iterations: usize,
    /// `|f_n - f_{n-1}|` in the `eta~`-weighted norm, one per new source.
    pub residuals: Vec<f64>,
    /// `residuals[n] / |f_n|`.
    pub relative: Vec<f64>,
    /// Weighted norm of the first convective source `f_1`.
    pub first_correction: f64,
    pub converged: bool,
}

impl PicardInfo {
    /// `residuals[n + 1] / residuals[n]`.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.residuals.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct NonlinearSolution {
    pub solution: ControlSolution,
    pub picard: PicardInfo,
}

/// `-(v . grad) v` at every time node.
pub fn convective_source(prob: &ControlProblem, v: &[VelocityField]) -> Vec<VelocityField> {
    v.iter().map(|f| convective_term(prob.grid(), f).scaled(-1.0)).collect()
}

/// Solves the null-control problem with the convective term by Picard
/// iteration on the source: `f_0 = 0`, and `f_n = -(v_{n-1} . grad) v_{n-1}`
/// from the state of the previous solve. The source already in `prob` is
/// kept as a fixed part. Each solve is warm-started from the previous
/// control.
///
/// Fails with [`Error::PicardDivergence`] when the weighted update grows
/// [`DIVERGENCE_STREAK`] times in a row.
pub fn nonlinear_control_solve(prob: &ControlProblem, opts: &PicardOptions) -> Result<NonlinearSolution> {
    let ws = ControlWorkspace::new(prob)?;
    nonlinear_control_solve_with(&ws, prob, opts)
}

/// [`nonlinear_control_solve`] reusing a workspace built for `prob`.
pub fn nonlinear_control_solve_with(
    ws: &ControlWorkspace,
    prob: &ControlProblem,
    opts: &PicardOptions,
) -> Result<NonlinearSolution> {
    opts.validate()?;
    let g = *prob.grid();
    let base: Vec<VelocityField> =
        if prob.forcing.is_empty() { vec![VelocityField::zeros(&g); g.nt + 1] } else { prob.forcing.clone() };
    let mut p = prob.clone();
    let mut sol = ws.solve(&p)?;
    let mut info = PicardInfo { iterations: 1, ..PicardInfo::default() };
    if opts.mode == InnerMode::Linear {
        info.converged = true;
        return Ok(NonlinearSolution { solution: sol, picard: info });
    }

    let mut source = vec![VelocityField::zeros(&g); g.nt + 1];
    let mut streak = 0;
    loop {
        let next = convective_source(prob, &sol.state.velocity);
        let diff: Vec<VelocityField> = next.iter().zip(&source).map(|(a, b)| a.sub(b)).collect();
        let residual = source_weighted_norm2(prob, &diff).sqrt();
        let size = source_weighted_norm2(prob, &next).sqrt();
        if !residual.is_finite() {
            return Err(Error::NonFinite("Picard source".into()));
        }
        if info.residuals.is_empty() {
            info.first_correction = size;
        }
        let relative = if residual == 0.0 { 0.0 } else { residual / size };
        if info.residuals.last().is_some_and(|&last| residual > last) {
            streak += 1;
        } else {
            streak = 0;
        }
        info.residuals.push(residual);
        info.relative.push(relative);
        if relative <= opts.tol {
            info.converged = true;
            break;
        }
        if streak >= DIVERGENCE_STREAK {
            return Err(Error::PicardDivergence { history: info.residuals });
        }
        if info.iterations >= opts.max_iter {
            break;
        }
        source = next;
        p.forcing = base
            .iter()
            .zip(&source)
            .map(|(b, s)| {
                let mut f = b.clone();
                f.axpy(1.0, s);
                f
            })
            .collect();
        p.initial_guess = Some(sol.control);
        sol = ws.solve(&p)?;
        info.iterations += 1;
    }
    Ok(NonlinearSolution { solution: sol, picard: info })
}
