//! Empirical constants of the inequalities relating the weight families.

use super::build::CarlemanWeightSet;
use super::eta0::{alpha_derivative_constants, numerator_ratio};
use crate::error::Result;

/// One inequality `LHS <= C * RHS` and its empirical constant
/// `max LHS / RHS` over the sampled nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub constant: f64,
    pub samples: usize,
    /// Nodes skipped because a weight involved was capped.
    pub excluded: usize,
}

impl InequalityCheck {
    pub fn passed(&self) -> bool {
        self.constant.is_finite() && self.samples > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightReport {
    pub checks: Vec<InequalityCheck>,
    /// Last time node used for the capped-sensitive checks.
    pub window_end: f64,
    pub capped_fraction: f64,
}

impl WeightReport {
    pub fn all_finite(&self) -> bool {
        self.checks.iter().all(InequalityCheck::passed)
    }

    pub fn get(&self, name: &str) -> Option<&InequalityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// End of the evaluation window: the largest multiple of `T/16` (at least
/// `T/2`) before which no tilde weight reaches the cap. Using a fixed
/// dyadic time keeps the sampled maxima comparable across resolutions.
fn window_end(ws: &CarlemanWeightSet) -> f64 {
    let t_final = ws.grid.t_final;
    let p = &ws.params;
    let n_max = ws.numerator.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut end = 0.5 * t_final;
    for k in 9..16 {
        let t = k as f64 * t_final / 16.0;
        let l = super::eval_ell(t, t_final).expect("inside horizon");
        if p.s * n_max / l.powi(8) <= p.exp_cap {
            end = t;
        } else {
            break;
        }
    }
    end
}

/// Evaluates every weight inequality and returns the empirical constants.
pub fn check_weight_inequalities(ws: &CarlemanWeightSet) -> Result<WeightReport> {
    let grid = &ws.grid;
    let p = &ws.params;
    let nc = grid.n_cells();
    let mut checks = Vec::new();

    checks.push(InequalityCheck {
        name: "max_alpha0_le_2_min_alpha0",
        constant: numerator_ratio(&ws.eta0, p.lambda, p.m0) / 2.0,
        samples: nc,
        excluded: 0,
    });

    let (c1, c2) = alpha_derivative_constants(grid, &ws.eta0, p.lambda, p.m0)?;
    let interior = nc * (grid.nt - 1);
    checks.push(InequalityCheck { name: "alpha_t_le_xi_9_8", constant: c1, samples: interior, excluded: 0 });
    checks.push(InequalityCheck { name: "alpha_tt_le_xi_5_4", constant: c2, samples: interior, excluded: 0 });

    let end = window_end(ws);
    let (mut z_eta, mut zzt, mut eta_zg, mut zg_g6) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let (mut samples, mut excluded) = (0, 0);
    for n in 0..=grid.nt {
        if grid.time(n) > end + 1e-12 {
            excluded += nc;
            continue;
        }
        if ws.hat_capped[n] {
            excluded += nc;
            continue;
        }
        let (lz, lg) = (ws.zeta[n].ln(), ws.gamma[n].ln());
        for c in 0..nc {
            if ws.tilde_capped[n * nc + c] {
                excluded += 1;
                continue;
            }
            samples += 1;
            let (lrho, leta) = (ws.tilde_rho.get(n, c).ln(), ws.eta_tilde.get(n, c).ln());
            z_eta = z_eta.max((lz - leta).exp());
            zzt = zzt.max(((ws.zeta[n] * ws.zeta_t[n]).abs().ln() - 2.0 * lrho).exp());
            eta_zg = eta_zg.max((2.0 * leta - lz - 3.0 * lg).exp());
            zg_g6 = zg_g6.max((lz - 3.0 * lg).exp());
        }
    }
    for (name, constant) in [
        ("zeta_le_eta_tilde", z_eta),
        ("zeta_zeta_t_le_rho_tilde_sq", zzt),
        ("eta_tilde_sq_le_zeta_gamma_cubed", eta_zg),
        ("zeta_gamma_cubed_le_gamma_sixth", zg_g6),
    ] {
        checks.push(InequalityCheck { name, constant, samples, excluded });
    }

    let capped_fraction = ws.tilde_capped_fraction();
    Ok(WeightReport { checks, window_end: end, capped_fraction })
}
