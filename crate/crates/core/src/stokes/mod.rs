//! Linear time-dependent Stokes system with time-varying viscosity and its
//! discrete adjoint.

mod basis;
mod params;
mod solver;
mod trajectory;

pub use basis::{modal_basis, ModalBasis};
pub use params::{PhysParams, Scheme};
pub use solver::{check_solenoidal, StokesSolver, DIV_REL_TOL};
pub use trajectory::{Trajectory, TrajectoryKind};
