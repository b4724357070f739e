use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::Scheme;
use crate::error::Result;
use crate::grid::io::{write_atomic, write_scalar_snapshot, write_velocity_snapshot};
use crate::grid::{GridSpec, ScalarField, VelocityField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    Forward,
    Adjoint,
}

impl TrajectoryKind {
    pub fn name(&self) -> &'static str {
        match self {
            TrajectoryKind::Forward => "forward",
            TrajectoryKind::Adjoint => "adjoint",
        }
    }
}

/// Velocity and pressure at every time node.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub scheme: Scheme,
    pub times: Vec<f64>,
    pub velocity: Vec<VelocityField>,
    pub pressure: Vec<ScalarField>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.velocity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocity.is_empty()
    }

    pub fn last(&self) -> &VelocityField {
        self.velocity.last().expect("trajectory has at least one node")
    }

    /// Writes one snapshot per node and field plus `index.txt` listing
    /// `node time velocity_file pressure_file`.
    pub fn dump(&self, dir: &Path, grid: &GridSpec) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut index = String::new();
        let _ = writeln!(index, "# kind = {}", self.kind.name());
        let _ = writeln!(index, "# scheme = {}", self.scheme.name());
        let _ = writeln!(index, "# node time velocity pressure");
        for (n, (v, q)) in self.velocity.iter().zip(&self.pressure).enumerate() {
            let vf = format!("v_{n:05}.snap");
            let qf = format!("q_{n:05}.snap");
            write_velocity_snapshot(&dir.join(&vf), grid, v, self.times[n])?;
            write_scalar_snapshot(&dir.join(&qf), grid, q, self.times[n])?;
            let _ = writeln!(index, "{n} {:e} {vf} {qf}", self.times[n]);
        }
        write_atomic(&dir.join("index.txt"), index.as_bytes())
    }
}
