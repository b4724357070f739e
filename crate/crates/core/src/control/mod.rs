//! Weighted null-control problem for the linear system and empirical checks
//! of its properties.

mod carleman;
mod cg;
mod continuity;
mod energy;
mod measure;
mod oracle;
mod problem;
mod riccati;

pub use carleman::{
    carleman_ratio_test, carleman_terms, random_adjoint_data, CarlemanFamily, CarlemanReport, CarlemanSample,
    CarlemanTerms, CarlemanTest, RatioStats,
};
pub use cg::{solve_null_control, ControlWorkspace};
pub use continuity::{continuity_check, continuity_check_with, ContinuityReport, ContinuityStep};
pub(crate) use continuity::source_weighted_norm2;
pub use energy::{verify_energy_estimates, EnergyEstimate, EnergyReport, EnergyWeighting};
pub use oracle::{dense_kkt_oracle, oracle_unknowns, ORACLE_MAX_UNKNOWNS};
pub use problem::{
    assemble_cost, ControlProblem, ControlSolution, DEFAULT_CG_MAXIT, DEFAULT_CG_TOL, DEFAULT_EPS_PEN,
};
