//! Run summary, time-series table and field snapshots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use keps_nullctl::fixpoint::{FixedPointOutcome, FixedPointReport};
use keps_nullctl::grid::io::{write_atomic, write_scalar_snapshot, write_velocity_snapshot, write_vtk};
use keps_nullctl::grid::GridSpec;
use keps_nullctl::keps::DerivedConstants;
use keps_nullctl::weights::WeightParams;
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const TIMESERIES_HEADER: &str = "iter,t,norm_v,norm_grad_v,phi0,cost_v,cost_u,final_norm,in_G";

#[derive(Debug, Clone, Serialize)]
pub struct WeightsUsed {
    pub lambda: f64,
    pub s: f64,
    pub m0: f64,
    pub exp_cap: f64,
}

impl From<&WeightParams> for WeightsUsed {
    fn from(p: &WeightParams) -> Self {
        Self { lambda: p.lambda, s: p.s, m0: p.m0, exp_cap: p.exp_cap }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantsOut {
    #[serde(rename = "M")]
    pub m: f64,
    /// `None` when infinite.
    pub b1: Option<f64>,
    pub beta0: f64,
}

impl From<&DerivedConstants> for ConstantsOut {
    fn from(c: &DerivedConstants) -> Self {
        Self { m: c.m, b1: c.b1.is_finite().then_some(c.b1), beta0: c.beta0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdicts {
    pub converged: bool,
    pub null_controlled: bool,
    pub all_in_g: bool,
    pub small_data: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Costs {
    pub cost_v: f64,
    pub cost_u: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub phase: Option<String>,
    pub message: String,
    pub diagnosis: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub setup: f64,
    pub k_equation: f64,
    pub phi0_ode: f64,
    pub control: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    /// `converged`, `not_converged` or `failed`.
    pub status: String,
    pub failure: Option<Failure>,
    pub config: RunConfig,
    pub weights: Option<WeightsUsed>,
    pub constants: Option<ConstantsOut>,
    pub verdicts: Option<Verdicts>,
    pub outer_iterations: usize,
    pub residuals: Vec<f64>,
    pub picard_iterations: Vec<usize>,
    pub costs: Option<Costs>,
    pub initial_norm: Option<f64>,
    pub final_norm: Option<f64>,
    pub final_ratio: Option<f64>,
    pub timings: Timings,
}

impl RunSummary {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            status: "failed".into(),
            failure: None,
            config: config.clone(),
            weights: None,
            constants: None,
            verdicts: None,
            outer_iterations: 0,
            residuals: Vec::new(),
            picard_iterations: Vec::new(),
            costs: None,
            initial_norm: None,
            final_norm: None,
            final_ratio: None,
            timings: Timings::default(),
        }
    }

    pub fn record(&mut self, out: &FixedPointOutcome) {
        let r = &out.report;
        self.status = if r.succeeded() { "converged" } else { "not_converged" }.into();
        self.constants = Some((&r.constants).into());
        self.verdicts = Some(Verdicts {
            converged: r.converged,
            null_controlled: r.null_controlled,
            all_in_g: r.all_in_g(),
            small_data: r.small_data,
        });
        self.outer_iterations = r.outer_iterations();
        self.residuals = r.residuals();
        self.picard_iterations = r.iterations.iter().map(|i| i.picard.iterations).collect();
        let s = &out.solution;
        self.costs = Some(Costs { cost_v: s.cost_v, cost_u: s.cost_u, penalty: s.penalty });
        self.initial_norm = Some(r.initial_norm);
        self.final_norm = Some(s.final_norm);
        self.final_ratio = Some(r.final_ratio);
        self.timings.k_equation = r.times.k_equation;
        self.timings.phi0_ode = r.times.phi0_ode;
        self.timings.control = r.times.control;
    }

    pub fn fail(&mut self, err: &CliError) {
        self.status = "failed".into();
        let (phase, message, root) = match err {
            CliError::Solver(e) => {
                let phase = match e {
                    keps_nullctl::Error::Phase { phase, .. } => Some(phase.to_string()),
                    _ => None,
                };
                (phase, e.to_string(), Some(e.root()))
            }
            other => (None, other.to_string(), None),
        };
        let diagnosis = match root {
            Some(keps_nullctl::Error::PicardDivergence { .. }) => {
                Some("Picard iteration diverged: the initial velocity is too large for the small-data regime".into())
            }
            Some(keps_nullctl::Error::Cfl { required, .. }) => {
                Some(format!("reduce the time step to at most {required:e} (increase grid.nt)"))
            }
            _ => None,
        };
        self.failure = Some(Failure { phase, message, diagnosis });
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).expect("summary serializes");
        write_atomic(&dir.join(SUMMARY_FILE), text.as_bytes())?;
        Ok(())
    }
}

/// One row per outer iteration and time node.
pub fn timeseries_table(grid: &GridSpec, report: Option<&FixedPointReport>) -> String {
    let mut s = String::from(TIMESERIES_HEADER);
    s.push('\n');
    for rec in report.map(|r| r.iterations.as_slice()).unwrap_or_default() {
        let in_g = rec.membership.is_member();
        for n in 0..=grid.nt {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                rec.iteration,
                grid.time(n),
                rec.norm_v[n],
                rec.norm_grad_v[n],
                rec.phi0[n],
                rec.cost_v,
                rec.cost_u,
                rec.final_norm,
                in_g
            );
        }
    }
    s
}

pub fn write_timeseries(dir: &Path, grid: &GridSpec, report: Option<&FixedPointReport>) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join(TIMESERIES_FILE), timeseries_table(grid, report).as_bytes())?;
    Ok(())
}

/// Velocity, control and kinetic energy every `every` nodes (and at the
/// final node) as snapshots plus one VTK file per node.
pub fn write_snapshots(dir: &Path, grid: &GridSpec, out: &FixedPointOutcome, every: usize) -> Result<(), CliError> {
    if every == 0 {
        return Ok(());
    }
    let dir = dir.join("snapshots");
    fs::create_dir_all(&dir)?;
    let mut nodes: Vec<usize> = (0..=grid.nt).step_by(every).collect();
    if nodes.last() != Some(&grid.nt) {
        nodes.push(grid.nt);
    }
    for n in nodes {
        let t = grid.time(n);
        let v = &out.solution.state.velocity[n];
        let k = &out.turbulence.k[n];
        write_velocity_snapshot(&dir.join(format!("v_{n:05}.snap")), grid, v, t)?;
        write_velocity_snapshot(&dir.join(format!("u_{n:05}.snap")), grid, &out.solution.control[n], t)?;
        write_scalar_snapshot(&dir.join(format!("k_{n:05}.snap")), grid, k, t)?;
        write_vtk(&dir.join(format!("fields_{n:05}.vtk")), grid, &[("k", k)], Some(v))?;
    }
    Ok(())
}
