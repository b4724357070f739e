//! Turbulent kinetic energy, the viscosity ratio and the admissible set.

mod constants;
mod ksolver;
mod phi0;

pub use constants::{check_g_membership, compute_constants, strain_integrals, DerivedConstants, GMembership};
pub use ksolver::{advective_dt_limit, solve_k_equation};
pub use phi0::{gradient_ratio_integral, integrate_phi0};

use std::f64::consts::PI;

use crate::grid::init::random_smooth_scalar;
use crate::grid::{GridSpec, ScalarField};

/// Kinetic energy and viscosity ratio at every time node.
#[derive(Debug, Clone, PartialEq)]
pub struct TurbulenceState {
    pub k: Vec<ScalarField>,
    pub phi0: Vec<f64>,
}

impl TurbulenceState {
    /// Smallest kinetic energy over all nodes.
    pub fn k_min(&self) -> f64 {
        self.k.iter().map(ScalarField::min).fold(f64::INFINITY, f64::min)
    }

    /// `(min, max)` of the viscosity ratio.
    pub fn phi0_range(&self) -> (f64, f64) {
        self.phi0.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)))
    }

    /// Whether `beta0 <= phi0 <= M` at every node.
    pub fn phi0_within(&self, consts: &DerivedConstants) -> bool {
        let (lo, hi) = self.phi0_range();
        lo >= consts.beta0 && hi <= consts.m
    }
}

/// Shape of the initial kinetic energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyProfile {
    Constant,
    /// `1 + cos(pi x / lx) cos(pi y / ly) / 2`, zero normal derivative.
    Cosine,
    /// `1 + s / (2 max |s|)` for a smooth random `s` from the seed.
    RandomSmooth,
}

/// Positive initial kinetic energy of the given profile, scaled so that its
/// mean is `amplitude` for the constant and cosine profiles.
pub fn initial_energy(grid: &GridSpec, profile: EnergyProfile, amplitude: f64, seed: u64) -> ScalarField {
    match profile {
        EnergyProfile::Constant => ScalarField::constant(grid, amplitude),
        EnergyProfile::Cosine => ScalarField::from_fn(grid, |x, y| {
            amplitude * (1.0 + 0.5 * (PI * x / grid.lx).cos() * (PI * y / grid.ly).cos())
        }),
        EnergyProfile::RandomSmooth => {
            let s = random_smooth_scalar(grid, seed, 4);
            let peak = s.max_abs();
            let scale = if peak > 0.0 { 0.5 / peak } else { 0.0 };
            s.map(|x| amplitude * (1.0 + scale * x))
        }
    }
}
