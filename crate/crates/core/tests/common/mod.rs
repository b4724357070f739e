#![allow(dead_code)]

use std::sync::Arc;

use keps_nullctl::control::ControlProblem;
use keps_nullctl::grid::init::random_eddies;
use keps_nullctl::grid::{CellRect, GridSpec, RegionMask, VelocityField};
use keps_nullctl::stokes::{PhysParams, Scheme, StokesSolver};
use keps_nullctl::weights::{build_eta0, build_weights, CarlemanWeightSet, WeightConfig};

pub fn omega(g: &GridSpec) -> RegionMask {
    RegionMask::from_rect(g, CellRect::new(0.25, 0.75, 0.25, 0.75).unwrap()).unwrap()
}

pub fn omega0(g: &GridSpec) -> RegionMask {
    RegionMask::from_rect(g, CellRect::new(0.375, 0.625, 0.375, 0.625).unwrap()).unwrap()
}

pub fn weights(g: &GridSpec) -> Arc<CarlemanWeightSet> {
    let eta = build_eta0(g, &omega0(g)).unwrap();
    let p = WeightConfig::default().resolve(g, &eta).unwrap();
    Arc::new(build_weights(&p, &eta, g).unwrap())
}

/// Unit square, constant viscosity ratio, eddy initial state of norm `amp`.
pub fn problem(n: usize, nt: usize, scheme: Scheme, amp: f64) -> ControlProblem {
    let g = GridSpec::unit(n, nt).unwrap();
    let solver = StokesSolver::new(g, PhysParams::default(), scheme).unwrap();
    let v0 = if amp == 0.0 { VelocityField::zeros(&g) } else { random_eddies(&g, 1, amp) };
    ControlProblem::new(solver, vec![0.1; nt + 1], v0, omega(&g), weights(&g))
}

pub fn rel_diff(a: &[VelocityField], b: &[VelocityField], g: &GridSpec) -> f64 {
    use keps_nullctl::grid::l2_norm;
    let num: f64 = a.iter().zip(b).map(|(x, y)| l2_norm(g, &x.sub(y)).powi(2)).sum();
    let den: f64 = b.iter().map(|y| l2_norm(g, y).powi(2)).sum();
    (num / den).sqrt()
}
