use std::f64::consts::PI;

use super::cg::ControlWorkspace;
use super::measure::weighted_integral;
use super::problem::{assemble_cost, ControlProblem, ControlSolution};
use crate::error::{Error, Result};
use crate::grid::init::random_smooth_velocity;
use crate::grid::{cell_energy_density, l2_norm, VelocityField};

/// Distances for one perturbation level.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityStep {
    /// Factor `2^-k` applied to the base perturbation.
    pub scale: f64,
    /// `sqrt(|dv0|^2 + int eta~^2 |df|^2)`.
    pub data_distance: f64,
    /// `sqrt(int rho~^2 |v_k - v|^2)`.
    pub state_distance: f64,
    /// `sqrt(int_omega eta~^2 |u_k - u|^2)`.
    pub control_distance: f64,
}

impl ContinuityStep {
    pub fn distance(&self) -> f64 {
        self.state_distance.hypot(self.control_distance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    pub steps: Vec<ContinuityStep>,
    /// `max distance / data_distance`; every step satisfies
    /// `distance <= lipschitz * data_distance`.
    pub lipschitz: f64,
    /// `min distance / data_distance`, equal to `lipschitz` for an exactly
    /// linear solution map.
    pub lipschitz_min: f64,
    /// Distances strictly decrease with the perturbation (non-increasing
    /// once they vanish).
    pub monotone: bool,
    /// Every solve reached its tolerance.
    pub converged: bool,
}

impl ContinuityReport {
    pub fn passed(&self) -> bool {
        self.monotone && self.converged && self.lipschitz.is_finite()
    }

    /// `distance_{k+1} / distance_k` for consecutive levels.
    pub fn halving_ratios(&self) -> Vec<f64> {
        self.steps.windows(2).map(|w| w[1].distance() / w[0].distance()).collect()
    }
}

/// Perturbs the data of `prob` by `2^-k (dv0, df)`, `k = 1..=levels`, and
/// measures the weighted distance of each solution to the unperturbed one.
/// `df` may be empty (no source perturbation); `dv0` must be solenoidal.
pub fn continuity_check_with(
    prob: &ControlProblem,
    dv0: &VelocityField,
    df: &[VelocityField],
    levels: usize,
) -> Result<ContinuityReport> {
    let g = *prob.grid();
    if !df.is_empty() && df.len() != g.nt + 1 {
        return Err(Error::Shape(format!("source perturbation has {} nodes, expected {}", df.len(), g.nt + 1)));
    }
    let workspace = ControlWorkspace::new(prob)?;
    let base = workspace.solve(prob)?;
    let mut converged = base.converged;
    let zero_forcing = vec![VelocityField::zeros(&g); g.nt + 1];
    let base_forcing = if prob.forcing.is_empty() { &zero_forcing } else { &prob.forcing };

    let df_norm2 = source_weighted_norm2(prob, df);
    let dv0_norm = l2_norm(&g, dv0);

    let mut steps = Vec::with_capacity(levels);
    for k in 1..=levels {
        let scale = 0.5f64.powi(k as i32);
        let mut p = prob.clone();
        let mut v0 = prob.v0.clone();
        v0.axpy(scale, dv0);
        p.v0 = v0;
        if !df.is_empty() {
            p.forcing = base_forcing
                .iter()
                .zip(df)
                .map(|(f, d)| {
                    let mut out = f.clone();
                    out.axpy(scale, d);
                    out
                })
                .collect();
        }
        p.initial_guess = Some(base.control.clone());
        let sol = workspace.solve(&p)?;
        converged &= sol.converged;
        let (state_distance, control_distance) = weighted_distance(prob, &base, &sol)?;
        steps.push(ContinuityStep {
            scale,
            data_distance: scale * (dv0_norm * dv0_norm + df_norm2).sqrt(),
            state_distance,
            control_distance,
        });
    }

    let ratios: Vec<f64> = steps
        .iter()
        .filter(|s| s.data_distance > 0.0)
        .map(|s| s.distance() / s.data_distance)
        .collect();
    let lipschitz = ratios.iter().copied().fold(0.0, f64::max);
    let lipschitz_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let monotone = steps.windows(2).all(|w| {
        let (a, b) = (w[0].distance(), w[1].distance());
        if a == 0.0 {
            b == 0.0
        } else {
            b < a
        }
    });
    Ok(ContinuityReport {
        steps,
        lipschitz,
        lipschitz_min: if lipschitz_min.is_finite() { lipschitz_min } else { 0.0 },
        monotone,
        converged,
    })
}

/// [`continuity_check_with`] for a seeded random perturbation: a smooth
/// solenoidal `dv0` of norm `max(|v0|, 1)` and a source
/// `df = sin(pi t / T) w(x)` of equal weighted norm.
pub fn continuity_check(prob: &ControlProblem, n_perturbations: usize, seed: u64) -> Result<ContinuityReport> {
    let g = *prob.grid();
    let size = l2_norm(&g, &prob.v0).max(1.0);
    let dv0 = random_smooth_velocity(&g, seed, 4, size);
    let shape = random_smooth_velocity(&g, seed.wrapping_add(1), 4, 1.0);
    let mut df: Vec<VelocityField> =
        (0..=g.nt).map(|n| shape.scaled((PI * g.time(n) / g.t_final).sin())).collect();
    let norm = source_weighted_norm2(prob, &df).sqrt();
    if norm > 0.0 {
        df.iter_mut().for_each(|f| f.scale(size / norm));
    }
    continuity_check_with(prob, &dv0, &df, n_perturbations)
}

fn weighted_distance(prob: &ControlProblem, a: &ControlSolution, b: &ControlSolution) -> Result<(f64, f64)> {
    let g = prob.grid();
    let dv: Vec<VelocityField> = a.state.velocity.iter().zip(&b.state.velocity).map(|(x, y)| x.sub(y)).collect();
    let du: Vec<VelocityField> = a.control.iter().zip(&b.control).map(|(x, y)| x.sub(y)).collect();
    let (cv, cu) = assemble_cost(g, &dv, &du, &prob.weights)?;
    Ok((cv.max(0.0).sqrt(), cu.max(0.0).sqrt()))
}

/// `int_0^T int eta~^2 |f|^2` by the same quadrature as the cost.
pub(crate) fn source_weighted_norm2(prob: &ControlProblem, f: &[VelocityField]) -> f64 {
    let g = prob.grid();
    let tw = g.trapezoid_weights();
    f.iter()
        .enumerate()
        .map(|(n, fld)| {
            let eta = prob.weights.eta_tilde.at(n);
            tw[n] * weighted_integral(g, &cell_energy_density(g, fld), |c| eta[c] * eta[c], |_| false)
        })
        .sum()
}
