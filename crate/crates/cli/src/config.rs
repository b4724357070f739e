//! Run configuration: a TOML file with one table per section. Every field
//! has a default, unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use keps_nullctl::control::{ControlProblem, DEFAULT_CG_MAXIT, DEFAULT_CG_TOL, DEFAULT_EPS_PEN};
use keps_nullctl::fixpoint::{
    FixedPointConfig, InnerMode, PicardOptions, DEFAULT_EPS_SMALL, DEFAULT_FINAL_TOL, DEFAULT_FP_TOL,
    DEFAULT_MAX_OUTER, DEFAULT_MAX_PICARD, DEFAULT_PICARD_TOL,
};
use keps_nullctl::grid::init::{random_eddies, random_smooth_velocity};
use keps_nullctl::grid::{CellRect, GridSpec, RegionMask, ScalarField, VelocityField};
use keps_nullctl::keps::{initial_energy, EnergyProfile};
use keps_nullctl::stokes::{PhysParams, Scheme, StokesSolver};
use keps_nullctl::weights::{build_eta0, build_weights, CarlemanWeightSet, WeightConfig, WeightParams, DEFAULT_EXP_CAP};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSection,
    pub physics: PhysicsSection,
    pub weights: WeightsSection,
    pub control: ControlSection,
    pub fixpoint: FixpointSection,
    pub io: IoSection,
    pub init: InitSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Ly")]
    pub ly: f64,
    pub nt: usize,
    #[serde(rename = "T")]
    pub t_final: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { nx: 32, ny: 32, lx: 1.0, ly: 1.0, nt: 64, t_final: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsSection {
    pub nu: f64,
    pub c_nu: f64,
    pub kappa: f64,
    pub c0: f64,
    pub a: f64,
    pub phi00: f64,
    pub alpha_reg: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        let p = PhysParams::default();
        Self { nu: p.nu, c_nu: p.c_nu, kappa: p.kappa, c0: p.c0, a: p.a, phi00: p.phi00, alpha_reg: p.alpha_reg }
    }
}

/// A number or the word `"auto"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr {
    Value(f64),
    Word(String),
}

impl Default for AutoOr {
    fn default() -> Self {
        AutoOr::Word("auto".into())
    }
}

impl AutoOr {
    fn resolve(&self, path: &str) -> Result<Option<f64>, CliError> {
        match self {
            AutoOr::Value(v) => Ok(Some(*v)),
            AutoOr::Word(w) if w == "auto" => Ok(None),
            AutoOr::Word(w) => Err(CliError::Config(format!("{path}: expected a number or \"auto\", got {w:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsSection {
    pub lambda: AutoOr,
    pub s: AutoOr,
    pub m0: AutoOr,
    pub exp_cap: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        Self { lambda: AutoOr::default(), s: AutoOr::default(), m0: AutoOr::default(), exp_cap: DEFAULT_EXP_CAP }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    ImplicitEuler,
    CrankNicolson,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::ImplicitEuler => Scheme::ImplicitEuler,
            SchemeName::CrankNicolson => Scheme::CrankNicolson,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    pub eps_pen: f64,
    pub cg_tol: f64,
    pub cg_maxit: usize,
    pub scheme: SchemeName,
    /// Control region `[x0, x1, y0, y1]`; defaults to the middle half of
    /// each side.
    pub omega: Option<[f64; 4]>,
    /// Region where the spatial weight peaks; defaults to the middle
    /// quarter of each side.
    pub omega0: Option<[f64; 4]>,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            eps_pen: DEFAULT_EPS_PEN,
            cg_tol: DEFAULT_CG_TOL,
            cg_maxit: DEFAULT_CG_MAXIT,
            scheme: SchemeName::ImplicitEuler,
            omega: None,
            omega0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerName {
    Nonlinear,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixpointSection {
    pub fp_tol: f64,
    pub picard_tol: f64,
    pub max_outer: usize,
    pub max_picard: usize,
    pub final_tol: f64,
    pub inner: InnerName,
    pub eps_small: f64,
}

impl Default for FixpointSection {
    fn default() -> Self {
        Self {
            fp_tol: DEFAULT_FP_TOL,
            picard_tol: DEFAULT_PICARD_TOL,
            max_outer: DEFAULT_MAX_OUTER,
            max_picard: DEFAULT_MAX_PICARD,
            final_tol: DEFAULT_FINAL_TOL,
            inner: InnerName::Nonlinear,
            eps_small: DEFAULT_EPS_SMALL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub out_dir: PathBuf,
    /// Write field snapshots every this many time nodes; 0 disables them.
    pub snapshot_every: usize,
}

impl Default for IoSection {
    fn default() -> Self {
        Self { out_dir: PathBuf::from("out"), snapshot_every: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityKind {
    Zero,
    RandomEddies,
    RandomSmooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyKind {
    Constant,
    Cosine,
    RandomSmooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitSection {
    pub v0_kind: VelocityKind,
    /// L2 norm of the initial velocity.
    pub v0_amplitude: f64,
    pub k0_kind: EnergyKind,
    /// Mean level of the initial kinetic energy.
    pub k0_amplitude: f64,
    pub seed: u64,
}

impl Default for InitSection {
    fn default() -> Self {
        Self {
            v0_kind: VelocityKind::RandomEddies,
            v0_amplitude: 1e-3,
            k0_kind: EnergyKind::Cosine,
            k0_amplitude: 1e-2,
            seed: 1,
        }
    }
}

fn check(cond: bool, path: &str, reason: impl std::fmt::Display) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Config(format!("{path}: {reason}")))
    }
}

fn config_error(e: keps_nullctl::Error) -> CliError {
    match e {
        keps_nullctl::Error::InvalidParameter { field, reason } => CliError::Config(format!("{field}: {reason}")),
        other => CliError::Config(other.to_string()),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Loads `text` with the dotted key `path` replaced by `value`, which
    /// is parsed as a TOML value (bare words are taken as strings).
    pub fn with_override(text: &str, path: &str, value: &str) -> Result<Self, CliError> {
        let mut root: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let parsed: toml::Value = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let keys: Vec<&str> = path.split('.').collect();
        let (last, parents) = keys.split_last().expect("split yields one item");
        let mut table = &mut root;
        for key in parents {
            let entry = table.entry(key.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| CliError::Config(format!("{path}: `{key}` is not a section")))?;
        }
        table.insert(last.to_string(), parsed);
        let cfg: RunConfig = root.try_into().map_err(|e: toml::de::Error| CliError::Config(format!("{path}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        let g = &self.grid;
        GridSpec::new(g.nx, g.ny, g.lx, g.ly, g.nt, g.t_final).map_err(config_error)
    }

    pub fn phys(&self) -> PhysParams {
        let p = &self.physics;
        PhysParams { nu: p.nu, c_nu: p.c_nu, kappa: p.kappa, c0: p.c0, a: p.a, phi00: p.phi00, alpha_reg: p.alpha_reg }
    }

    pub fn weight_config(&self) -> Result<WeightConfig, CliError> {
        let w = &self.weights;
        Ok(WeightConfig {
            lambda: w.lambda.resolve("weights.lambda")?,
            s: w.s.resolve("weights.s")?,
            m0: w.m0.resolve("weights.m0")?,
            exp_cap: w.exp_cap,
        })
    }

    pub fn fixed_point_config(&self) -> FixedPointConfig {
        let f = &self.fixpoint;
        FixedPointConfig {
            fp_tol: f.fp_tol,
            max_outer: f.max_outer,
            final_tol: f.final_tol,
            eps_small: f.eps_small,
            picard: PicardOptions {
                tol: f.picard_tol,
                max_iter: f.max_picard,
                mode: match f.inner {
                    InnerName::Nonlinear => InnerMode::Nonlinear,
                    InnerName::Linear => InnerMode::Linear,
                },
            },
        }
    }

    fn region(&self, rect: Option<[f64; 4]>, fraction: f64, path: &str) -> Result<CellRect, CliError> {
        let (lx, ly) = (self.grid.lx, self.grid.ly);
        let [x0, x1, y0, y1] = rect.unwrap_or([
            0.5 * lx * (1.0 - fraction),
            0.5 * lx * (1.0 + fraction),
            0.5 * ly * (1.0 - fraction),
            0.5 * ly * (1.0 + fraction),
        ]);
        check(x0 >= 0.0 && x1 <= lx && y0 >= 0.0 && y1 <= ly, path, "must lie inside the domain")?;
        CellRect::new(x0, x1, y0, y1).map_err(|e| CliError::Config(format!("{path}: {e}")))
    }

    /// Checks every section, reporting the first offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        self.grid_spec()?;
        self.phys().validate().map_err(config_error)?;
        let w = self.weight_config()?;
        for (path, v) in [("weights.lambda", w.lambda), ("weights.s", w.s), ("weights.m0", w.m0)] {
            if let Some(v) = v {
                check(v.is_finite() && v > 0.0, path, format!("must be positive, got {v}"))?;
            }
        }
        let (lo, hi) = keps_nullctl::weights::EXP_CAP_RANGE;
        check(w.exp_cap >= lo && w.exp_cap <= hi, "weights.exp_cap", format!("must lie in [{lo}, {hi}]"))?;
        let c = &self.control;
        check(c.eps_pen.is_finite() && c.eps_pen > 0.0, "control.eps_pen", "must be positive")?;
        check(c.cg_tol > 0.0 && c.cg_tol < 1.0, "control.cg_tol", "must lie in (0, 1)")?;
        check(c.cg_maxit > 0, "control.cg_maxit", "must be positive")?;
        let omega = self.region(c.omega, 0.5, "control.omega")?;
        let omega0 = self.region(c.omega0, 0.25, "control.omega0")?;
        check(
            omega.x0 <= omega0.x0 && omega0.x1 <= omega.x1 && omega.y0 <= omega0.y0 && omega0.y1 <= omega.y1,
            "control.omega0",
            "must lie inside control.omega",
        )?;
        self.fixed_point_config().validate().map_err(config_error)?;
        let i = &self.init;
        check(i.v0_amplitude.is_finite() && i.v0_amplitude >= 0.0, "init.v0_amplitude", "must be nonnegative")?;
        check(i.k0_amplitude.is_finite() && i.k0_amplitude >= 0.0, "init.k0_amplitude", "must be nonnegative")?;
        Ok(())
    }

    /// Builds the discretization, weights, initial data and the control
    /// problem template.
    pub fn setup(&self) -> Result<Setup, CliError> {
        self.validate()?;
        let grid = self.grid_spec()?;
        let phys = self.phys();
        let omega = RegionMask::from_rect(&grid, self.region(self.control.omega, 0.5, "control.omega")?)
            .map_err(config_error)?;
        let omega0 = RegionMask::from_rect(&grid, self.region(self.control.omega0, 0.25, "control.omega0")?)
            .map_err(config_error)?;
        let eta0 = build_eta0(&grid, &omega0).map_err(config_error)?;
        let params = self.weight_config()?.resolve(&grid, &eta0).map_err(config_error)?;
        let weights = Arc::new(build_weights(&params, &eta0, &grid).map_err(config_error)?);
        let solver = StokesSolver::new(grid, phys, self.control.scheme.into()).map_err(CliError::Solver)?;
        let i = &self.init;
        let v0 = match i.v0_kind {
            VelocityKind::Zero => VelocityField::zeros(&grid),
            VelocityKind::RandomEddies => random_eddies(&grid, i.seed, i.v0_amplitude),
            VelocityKind::RandomSmooth => random_smooth_velocity(&grid, i.seed, 4, i.v0_amplitude),
        };
        let profile = match i.k0_kind {
            EnergyKind::Constant => EnergyProfile::Constant,
            EnergyKind::Cosine => EnergyProfile::Cosine,
            EnergyKind::RandomSmooth => EnergyProfile::RandomSmooth,
        };
        let k0 = initial_energy(&grid, profile, i.k0_amplitude, i.seed);
        let mut problem = ControlProblem::new(solver, vec![phys.phi00; grid.nt + 1], v0, omega, weights.clone());
        problem.eps_pen = self.control.eps_pen;
        problem.cg_tol = self.control.cg_tol;
        problem.cg_maxit = self.control.cg_maxit;
        Ok(Setup { grid, params, weights, problem, k0 })
    }
}

/// Objects built from a [`RunConfig`].
pub struct Setup {
    pub grid: GridSpec,
    pub params: WeightParams,
    pub weights: Arc<CarlemanWeightSet>,
    pub problem: ControlProblem,
    pub k0: ScalarField,
}
