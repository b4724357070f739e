use super::measure::{energy_integral, laplacian_density, time_differences};
use super::problem::{ControlProblem, ControlSolution};
use crate::error::{Error, Result};
use crate::grid::{grad_norm2, l2_norm};

/// Time weights of the energy estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyWeighting {
    /// `zeta` for the first estimate, `gamma` for the second.
    Carleman,
    /// Both weights replaced by one.
    Unit,
}

/// One estimate `LHS <= C * RHS`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyEstimate {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl EnergyEstimate {
    /// Empirical constant `LHS / RHS`; zero when both vanish.
    pub fn constant(&self) -> f64 {
        if self.lhs == 0.0 {
            0.0
        } else {
            self.lhs / self.rhs
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    /// `max zeta^2 |v|^2 + int zeta^2 |grad v|^2` against the data and costs.
    pub l2: EnergyEstimate,
    /// `max gamma^2 |grad v|^2 + int gamma^2 (|v_t|^2 + |Lap v|^2)` against
    /// the same terms with `|grad v0|^2` in place of `|v0|^2`.
    pub h1: EnergyEstimate,
    /// Time nodes left out because the weights are capped there.
    pub excluded_nodes: usize,
}

impl EnergyReport {
    pub fn passed(&self) -> bool {
        self.l2.constant().is_finite() && self.h1.constant().is_finite()
    }
}

/// Evaluates both weighted energy estimates of the solution by discrete
/// quadrature. Nodes where the time weights are capped do not contribute
/// to the left-hand sides.
pub fn verify_energy_estimates(
    prob: &ControlProblem,
    sol: &ControlSolution,
    weighting: EnergyWeighting,
) -> Result<EnergyReport> {
    let g = prob.grid();
    let ws = &prob.weights;
    let v = &sol.state.velocity;
    if v.len() != g.nt + 1 || sol.control.len() != g.nt + 1 {
        return Err(Error::Shape("solution does not match the problem grid".into()));
    }
    let (zeta, gamma, skip): (Vec<f64>, Vec<f64>, Vec<bool>) = match weighting {
        EnergyWeighting::Carleman => (ws.zeta.clone(), ws.gamma.clone(), ws.hat_capped.clone()),
        EnergyWeighting::Unit => (vec![1.0; g.nt + 1], vec![1.0; g.nt + 1], vec![false; g.nt + 1]),
    };
    let tw = g.trapezoid_weights();
    let dt = g.dt();

    let energy: Vec<f64> = v.iter().map(|f| energy_integral(g, f)).collect();
    let dirichlet: Vec<f64> = v.iter().map(|f| grad_norm2(g, f).integral(g)).collect();
    let lap: Vec<f64> = v.iter().map(|f| laplacian_density(g, f).integral(g)).collect();
    let rate: Vec<f64> = time_differences(g, v).iter().map(|f| energy_integral(g, f)).collect();

    let mut l2_max = 0.0f64;
    let mut l2_int = 0.0;
    let mut h1_max = 0.0f64;
    let mut h1_int = 0.0;
    for n in 0..=g.nt {
        if skip[n] {
            continue;
        }
        let (z2, y2) = (zeta[n] * zeta[n], gamma[n] * gamma[n]);
        l2_max = l2_max.max(z2 * energy[n]);
        l2_int += tw[n] * z2 * dirichlet[n];
        h1_max = h1_max.max(y2 * dirichlet[n]);
        h1_int += tw[n] * y2 * lap[n];
        if n < g.nt && !skip[n + 1] {
            let mid = 0.5 * (y2 + gamma[n + 1] * gamma[n + 1]);
            h1_int += dt * mid * rate[n];
        }
    }

    let data = sol.cost_v + sol.cost_u + prob.forcing_weighted_norm2();
    let v0_l2 = l2_norm(g, &prob.v0).powi(2);
    let v0_h1 = grad_norm2(g, &prob.v0).integral(g);
    Ok(EnergyReport {
        l2: EnergyEstimate { name: "weighted_l2_energy", lhs: l2_max + l2_int, rhs: v0_l2 + data },
        h1: EnergyEstimate { name: "weighted_h1_energy", lhs: h1_max + h1_int, rhs: v0_h1 + data },
        excluded_nodes: skip.iter().filter(|&&s| s).count(),
    })
}
