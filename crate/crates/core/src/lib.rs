//! Numerical null controllability of a k-epsilon turbulence model.
//!
//! The crate discretizes a 2-D Stokes-type system coupled to a
//! turbulent-kinetic-energy equation on a staggered grid, computes distributed
//! controls that drive the velocity to rest via a weighted least-squares
//! (Carleman-type) formulation, and wraps the linear solver in a Picard /
//! fixed-point loop for the nonlinear coupled problem.

pub mod control;
pub mod error;
pub mod fixpoint;
pub mod grid;
pub mod keps;
pub mod stokes;
pub mod weights;

pub use error::{Error, Result};
