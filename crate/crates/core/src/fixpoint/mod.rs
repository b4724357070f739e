//! Picard solve of the nonlinear control problem and the outer fixed-point
//! iteration coupling velocity, kinetic energy and viscosity ratio.

mod outer;
mod picard;

pub use outer::{
    fixed_point_solve, map_b, FixedPointConfig, FixedPointOutcome, FixedPointReport, IterationRecord, MapOutput,
    PhaseTimes, DEFAULT_EPS_SMALL, DEFAULT_FINAL_TOL, DEFAULT_FP_TOL, DEFAULT_MAX_OUTER,
};
pub use picard::{
    convective_source, nonlinear_control_solve, nonlinear_control_solve_with, InnerMode, NonlinearSolution,
    PicardInfo, PicardOptions, DEFAULT_MAX_PICARD, DEFAULT_PICARD_TOL, DIVERGENCE_STREAK,
};
