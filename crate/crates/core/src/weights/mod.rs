//! Carleman weight families: the spatial weight `eta0`, the time profiles
//! `tau` and `ell`, and everything built from them.

mod build;
mod check;
mod eta0;
mod profile;

pub use build::{build_weights, CarlemanWeightSet, WeightConfig, WeightParams, DEFAULT_EXP_CAP, EXP_CAP_RANGE};
pub use check::{check_weight_inequalities, InequalityCheck, WeightReport};
pub use eta0::{
    alpha_derivative_constants, build_eta0, eta0_gradient_norm, find_lambda00, min_gradient_outside,
    numerator_ratio, select_m0, weight_numerator,
};
pub use profile::{ell_profile, eval_ell, eval_tau, tau_profile, ProfileValue};
