use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::measure::{laplacian_density, time_differences, weighted_integral};
use crate::error::{Error, Result};
use crate::grid::init::{random_smooth_scalar, random_smooth_velocity};
use crate::grid::{
    cell_energy_density, curl_norm2, grad_norm2, gradient,
    GridSpec, RegionMask, ScalarField, VelocityField,
};
use crate::stokes::{StokesSolver, Trajectory};
use crate::weights::{build_weights, CarlemanWeightSet, WeightParams};

/// Weighted observability inequality being sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CarlemanFamily {
    /// Weights `rho, xi, rho bar, xi bar`, vanishing at both ends.
    Rho,
    /// Weights `rho~, xi~, rho*, xi*`, positive at `t = 0`.
    RhoTilde,
    /// `int eta~^-2 |phi|^2` against the source and its restriction to the
    /// control region.
    EtaTilde,
}

impl CarlemanFamily {
    pub const ALL: [CarlemanFamily; 3] = [CarlemanFamily::Rho, CarlemanFamily::RhoTilde, CarlemanFamily::EtaTilde];

    pub fn name(&self) -> &'static str {
        match self {
            CarlemanFamily::Rho => "rho",
            CarlemanFamily::RhoTilde => "rho_tilde",
            CarlemanFamily::EtaTilde => "eta_tilde",
        }
    }
}

/// Both sides of one inequality for one adjoint solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlemanTerms {
    pub family: CarlemanFamily,
    pub lhs: f64,
    pub rhs: f64,
}

impl CarlemanTerms {
    /// `LHS / RHS`, or `None` when the right-hand side vanishes.
    pub fn ratio(&self) -> Option<f64> {
        (self.rhs > 0.0).then(|| self.lhs / self.rhs)
    }
}

/// Per-node densities of the adjoint solution at cell centers.
struct Densities {
    phi: Vec<ScalarField>,
    grad: Vec<ScalarField>,
    lap: Vec<ScalarField>,
    curl: Vec<ScalarField>,
    pressure: Vec<f64>,
    /// `int |phi_t|^2` per step.
    rate: Vec<f64>,
    source: Vec<ScalarField>,
}

impl Densities {
    fn new(grid: &GridSpec, adjoint: &Trajectory, forcing: &[VelocityField]) -> Self {
        let v = &adjoint.velocity;
        Self {
            phi: v.iter().map(|f| cell_energy_density(grid, f)).collect(),
            grad: v.iter().map(|f| grad_norm2(grid, f)).collect(),
            lap: v.iter().map(|f| laplacian_density(grid, f)).collect(),
            curl: v.iter().map(|f| curl_norm2(grid, f)).collect(),
            pressure: adjoint
                .pressure
                .iter()
                .map(|p| cell_energy_density(grid, &gradient(grid, p)).integral(grid))
                .collect(),
            rate: time_differences(grid, v).iter().map(|f| cell_energy_density(grid, f).integral(grid)).collect(),
            source: if forcing.is_empty() {
                vec![ScalarField::zeros(grid); v.len()]
            } else {
                forcing.iter().map(|f| cell_energy_density(grid, f)).collect()
            },
        }
    }
}

/// Evaluates every family for the adjoint solution `adjoint` of the source
/// `forcing` (empty means zero). Entries where a weight is capped are left
/// out of the left-hand sides; the right-hand sides use every node.
pub fn carleman_terms(
    ws: &CarlemanWeightSet,
    mask: &RegionMask,
    adjoint: &Trajectory,
    forcing: &[VelocityField],
) -> Result<Vec<CarlemanTerms>> {
    let g = &ws.grid;
    if adjoint.velocity.len() != g.nt + 1 || !mask.matches(g) {
        return Err(Error::Shape("adjoint trajectory or mask does not match the weights".into()));
    }
    if !forcing.is_empty() && forcing.len() != g.nt + 1 {
        return Err(Error::Shape(format!("source has {} nodes, expected {}", forcing.len(), g.nt + 1)));
    }
    let d = Densities::new(g, adjoint, forcing);
    Ok(CarlemanFamily::ALL.iter().map(|&f| family_terms(ws, mask, &d, f)).collect())
}

fn family_terms(ws: &CarlemanWeightSet, mask: &RegionMask, d: &Densities, family: CarlemanFamily) -> CarlemanTerms {
    let g = &ws.grid;
    let nc = g.n_cells();
    let s = ws.params.s;
    let tw = g.trapezoid_weights();
    let dt = g.dt();
    let omega = mask.cells();
    let (rho, xi, capped, rho_top, xi_top) = match family {
        CarlemanFamily::Rho => (&ws.rho, &ws.xi, &ws.capped, &ws.rho_bar, &ws.xi_bar),
        _ => (&ws.tilde_rho, &ws.tilde_xi, &ws.tilde_capped, &ws.rho_star, &ws.xi_star),
    };
    let node_capped: Vec<bool> = (0..=g.nt).map(|n| capped[n * nc..(n + 1) * nc].iter().any(|&c| c)).collect();
    // time-only weight rho_top^-2 (s xi_top)^-1
    let top = |n: usize| 1.0 / (rho_top[n] * rho_top[n] * s * xi_top[n]);

    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for n in 0..=g.nt {
        let r = rho.at(n);
        let x = xi.at(n);
        let cap = &capped[n * nc..(n + 1) * nc];
        let skip = |c: usize| cap[c];
        let inv2 = |c: usize| 1.0 / (r[c] * r[c]);
        match family {
            CarlemanFamily::Rho | CarlemanFamily::RhoTilde => {
                let mut node = weighted_integral(g, &d.curl[n], |c| inv2(c) * s * x[c], skip)
                    + weighted_integral(g, &d.lap[n], |c| inv2(c) / (s * x[c]), skip)
                    + weighted_integral(g, &d.grad[n], inv2, skip)
                    + weighted_integral(g, &d.phi[n], |c| inv2(c) * (s * x[c]).powi(2), skip);
                if !node_capped[n] {
                    node += top(n) * d.pressure[n];
                }
                lhs += tw[n] * node;
                if n < g.nt && !node_capped[n] && !node_capped[n + 1] {
                    lhs += dt * 0.5 * (top(n) + top(n + 1)) * d.rate[n];
                }
                let obs = weighted_integral(g, &d.phi[n], |c| inv2(c) * (s * x[c]).powi(3), |c| !omega[c]);
                rhs += tw[n] * (weighted_integral(g, &d.source[n], inv2, |_| false) + obs);
            }
            CarlemanFamily::EtaTilde => {
                let eta = ws.eta_tilde.at(n);
                let e_inv2 = |c: usize| 1.0 / (eta[c] * eta[c]);
                lhs += tw[n] * weighted_integral(g, &d.phi[n], e_inv2, skip);
                let obs = weighted_integral(g, &d.phi[n], e_inv2, |c| !omega[c]);
                rhs += tw[n] * (weighted_integral(g, &d.source[n], inv2, |_| false) + obs);
            }
        }
    }
    CarlemanTerms { family, lhs, rhs }
}

/// Settings of [`carleman_ratio_test`].
#[derive(Debug, Clone)]
pub struct CarlemanTest<'a> {
    pub solver: &'a StokesSolver,
    pub weights: &'a CarlemanWeightSet,
    pub phi0: &'a [f64],
    /// Control region of the observation term.
    pub mask: &'a RegionMask,
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanSample {
    pub index: usize,
    pub terms: Vec<CarlemanTerms>,
}

/// Ratio statistics of one family over the samples with a nonzero
/// right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioStats {
    pub family: CarlemanFamily,
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanReport {
    pub samples: Vec<CarlemanSample>,
    pub stats: Vec<RatioStats>,
    /// For the first sample, the `rho~` left-hand side recomputed with
    /// weights built from `2 s` does not exceed the one with `s`.
    pub doubled_s_decreases: bool,
    pub lhs_s: f64,
    pub lhs_2s: f64,
    pub capped_fraction: f64,
}

impl CarlemanReport {
    pub fn stats(&self, family: CarlemanFamily) -> Option<&RatioStats> {
        self.stats.iter().find(|s| s.family == family)
    }

    /// Every family has a finite positive largest ratio.
    pub fn passed(&self) -> bool {
        !self.stats.is_empty() && self.stats.iter().all(|s| s.count > 0 && s.max.is_finite() && s.max > 0.0)
    }

    /// `sample,family,lhs,rhs,ratio` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,family,lhs,rhs,ratio\n");
        for s in &self.samples {
            for t in &s.terms {
                let ratio = t.ratio().map_or_else(|| "nan".to_string(), |r| format!("{r:.10e}"));
                let _ = writeln!(out, "{},{},{:.10e},{:.10e},{}", s.index, t.family.name(), t.lhs, t.rhs, ratio);
            }
        }
        out
    }
}

/// Random adjoint data for sample `index`: a smooth solenoidal terminal
/// state and a source mixing two smooth solenoidal fields with a gradient,
/// each with a random amplitude. Defined in continuous coordinates, so the
/// same `(seed, index)` gives the same data at every resolution.
pub fn random_adjoint_data(grid: &GridSpec, seed: u64, index: usize) -> (Vec<VelocityField>, VelocityField) {
    let base = seed.wrapping_mul(1_000_003).wrapping_add(4 * index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    let mut amp = || 10f64.powf(rng.random_range(-1.0..1.0));
    let (a_t, a_1, a_2, a_p) = (amp(), amp(), amp(), amp());
    let phi_t = random_smooth_velocity(grid, base, 4, a_t);
    let w1 = random_smooth_velocity(grid, base + 1, 4, a_1);
    let w2 = random_smooth_velocity(grid, base + 2, 4, a_2);
    let p = random_smooth_scalar(grid, base + 3, 3);
    let gp = gradient(grid, &p.map(|x| a_p * x));
    let forcing = (0..=grid.nt)
        .map(|n| {
            let t = grid.time(n) / grid.t_final;
            let mut f = w1.scaled((PI * t).sin());
            f.axpy(t, &w2);
            f.axpy((PI * t).cos(), &gp);
            f
        })
        .collect();
    (forcing, phi_t)
}

/// Solves the adjoint system for `n_samples` random `(F, phi_T)` and
/// evaluates both sides of every weighted inequality.
pub fn carleman_ratio_test(test: &CarlemanTest) -> Result<CarlemanReport> {
    let ws = test.weights;
    let g = &ws.grid;
    if test.solver.grid() != g {
        return Err(Error::Shape("solver and weights live on different grids".into()));
    }
    let doubled = build_weights(&WeightParams { s: 2.0 * ws.params.s, ..ws.params }, &ws.eta0, g)?;
    let mut samples = Vec::with_capacity(test.n_samples);
    let (mut lhs_s, mut lhs_2s) = (0.0, 0.0);
    for index in 0..test.n_samples {
        let (forcing, phi_t) = random_adjoint_data(g, test.seed, index);
        let adjoint = test.solver.solve_adjoint(test.phi0, &forcing, &phi_t)?;
        let terms = carleman_terms(ws, test.mask, &adjoint, &forcing)?;
        if index == 0 {
            let pick = |t: &[CarlemanTerms]| {
                t.iter().find(|x| x.family == CarlemanFamily::RhoTilde).map_or(0.0, |x| x.lhs)
            };
            lhs_s = pick(&terms);
            lhs_2s = pick(&carleman_terms(&doubled, test.mask, &adjoint, &forcing)?);
        }
        samples.push(CarlemanSample { index, terms });
    }
    let stats = CarlemanFamily::ALL
        .iter()
        .map(|&family| {
            let mut r: Vec<f64> = samples
                .iter()
                .filter_map(|s| s.terms.iter().find(|t| t.family == family).and_then(CarlemanTerms::ratio))
                .collect();
            r.sort_by(f64::total_cmp);
            RatioStats {
                family,
                count: r.len(),
                min: r.first().copied().unwrap_or(f64::NAN),
                median: if r.is_empty() { f64::NAN } else { r[r.len() / 2] },
                max: r.last().copied().unwrap_or(f64::NAN),
            }
        })
        .collect();
    Ok(CarlemanReport {
        samples,
        stats,
        doubled_s_decreases: test.n_samples == 0 || lhs_2s <= lhs_s,
        lhs_s,
        lhs_2s,
        capped_fraction: ws.tilde_capped_fraction(),
    })
}
