//! Subcommand implementations. Each returns the process status on
//! completion and writes its artifacts under `out`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use keps_nullctl::control::{carleman_ratio_test, dense_kkt_oracle, solve_null_control, CarlemanTest};
use keps_nullctl::fixpoint::fixed_point_solve;
use keps_nullctl::grid::io::write_atomic;
use keps_nullctl::grid::{l2_norm, GridSpec, VelocityField};
use keps_nullctl::weights::check_weight_inequalities;
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{write_snapshots, write_timeseries, RunSummary, WeightsUsed};
use crate::{CliError, Status};

/// Largest relative difference accepted by `oracle-compare`.
pub const ORACLE_TOL: f64 = 1e-7;

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

/// Solves the coupled problem and writes `summary.json`, `timeseries.csv`
/// and snapshots. The summary is written even when the solve fails.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<Status, CliError> {
    let start = Instant::now();
    fs::create_dir_all(out)?;
    let mut summary = RunSummary::new(cfg);
    let result = run_inner(cfg, out, &mut summary, start);
    summary.timings.total = start.elapsed().as_secs_f64();
    if let Err(e) = &result {
        summary.fail(e);
        write_timeseries(out, &cfg.grid_spec().unwrap_or_else(|_| GridSpec::unit(4, 4).expect("valid")), None)?;
    }
    summary.write(out)?;
    result
}

fn run_inner(cfg: &RunConfig, out: &Path, summary: &mut RunSummary, start: Instant) -> Result<Status, CliError> {
    let setup = cfg.setup()?;
    summary.weights = Some(WeightsUsed::from(&setup.params));
    summary.timings.setup = start.elapsed().as_secs_f64();
    info!("setup done in {:.2} s", summary.timings.setup);
    let outcome = fixed_point_solve(&setup.problem, &setup.k0, &cfg.fixed_point_config())?;
    summary.record(&outcome);
    let report = &outcome.report;
    for rec in &report.iterations {
        info!(
            "outer {}: residual {:.3e}, Picard {}, in G {}",
            rec.iteration,
            rec.residual(),
            rec.picard.iterations,
            rec.membership.is_member()
        );
    }
    write_timeseries(out, &setup.grid, Some(report))?;
    write_snapshots(out, &setup.grid, &outcome, cfg.io.snapshot_every)?;
    if report.succeeded() {
        Ok(Status::Success)
    } else {
        warn!(
            "not converged: converged {}, null controlled {}, final ratio {:.3e}",
            report.converged, report.null_controlled, report.final_ratio
        );
        Ok(Status::VerificationFailure)
    }
}

/// Empirical constants of the weight inequalities (`weights_report.json`).
pub fn check_weights(cfg: &RunConfig, out: &Path) -> Result<Status, CliError> {
    fs::create_dir_all(out)?;
    let setup = cfg.setup()?;
    let report = check_weight_inequalities(&setup.weights)?;
    let checks: Vec<_> = report
        .checks
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "constant": finite_or_null(c.constant),
                "samples": c.samples,
                "excluded": c.excluded,
                "finite": c.passed(),
            })
        })
        .collect();
    let doc = json!({
        "weights": WeightsUsed::from(&setup.params),
        "window_end": report.window_end,
        "capped_fraction": report.capped_fraction,
        "all_finite": report.all_finite(),
        "checks": checks,
    });
    write_json(&out.join("weights_report.json"), &doc)?;
    for c in &report.checks {
        info!("{}: {:.4e} over {} nodes", c.name, c.constant, c.samples);
    }
    Ok(if report.all_finite() { Status::Success } else { Status::VerificationFailure })
}

/// Observability ratios for random adjoint data (`carleman.csv`,
/// `carleman_summary.json`).
pub fn carleman_test(cfg: &RunConfig, out: &Path, n_samples: usize) -> Result<Status, CliError> {
    if n_samples == 0 {
        return Err(CliError::Config("--samples: must be positive".into()));
    }
    fs::create_dir_all(out)?;
    let setup = cfg.setup()?;
    let p = &setup.problem;
    let report = carleman_ratio_test(&CarlemanTest {
        solver: &p.solver,
        weights: &setup.weights,
        phi0: &p.phi0,
        mask: &p.mask,
        n_samples,
        seed: cfg.init.seed,
    })?;
    write_atomic(&out.join("carleman.csv"), report.to_csv().as_bytes())?;
    let stats: Vec<_> = report
        .stats
        .iter()
        .map(|s| {
            json!({
                "family": s.family.name(),
                "count": s.count,
                "min": finite_or_null(s.min),
                "median": finite_or_null(s.median),
                "max": finite_or_null(s.max),
            })
        })
        .collect();
    let passed = report.passed() && report.doubled_s_decreases;
    let doc = json!({
        "samples": n_samples,
        "seed": cfg.init.seed,
        "stats": stats,
        "doubled_s_decreases": report.doubled_s_decreases,
        "lhs_s": report.lhs_s,
        "lhs_2s": report.lhs_2s,
        "capped_fraction": report.capped_fraction,
        "passed": passed,
    });
    write_json(&out.join("carleman_summary.json"), &doc)?;
    Ok(if passed { Status::Success } else { Status::VerificationFailure })
}

fn rel_diff(grid: &GridSpec, a: &[VelocityField], b: &[VelocityField]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| l2_norm(grid, &x.sub(y)).powi(2)).sum();
    let den: f64 = b.iter().map(|y| l2_norm(grid, y).powi(2)).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Compares the iterative linear control solve with the dense optimality
/// system (`oracle_compare.json`).
pub fn oracle_compare(cfg: &RunConfig, out: &Path) -> Result<Status, CliError> {
    fs::create_dir_all(out)?;
    let setup = cfg.setup()?;
    let p = &setup.problem;
    let dense = dense_kkt_oracle(p).map_err(|e| match e {
        e @ keps_nullctl::Error::TooLarge { .. } => CliError::Config(e.to_string()),
        other => other.into(),
    })?;
    let cg = solve_null_control(p)?;
    let g = &setup.grid;
    let control = rel_diff(g, &cg.control, &dense.control);
    let state = rel_diff(g, &cg.state.velocity, &dense.state.velocity);
    let objective = (cg.objective() - dense.objective()).abs() / dense.objective().abs().max(f64::MIN_POSITIVE);
    let worst = control.max(state).max(objective);
    let passed = worst <= ORACLE_TOL;
    let doc = json!({
        "control_rel_diff": control,
        "state_rel_diff": state,
        "objective_rel_diff": objective,
        "cg_iterations": cg.iterations,
        "tolerance": ORACLE_TOL,
        "passed": passed,
    });
    write_json(&out.join("oracle_compare.json"), &doc)?;
    info!("control {control:.3e}, state {state:.3e}, objective {objective:.3e}");
    Ok(if passed { Status::Success } else { Status::VerificationFailure })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: String,
    pub exit_code: i32,
    pub status: String,
    pub outer_iterations: usize,
    pub final_ratio: Option<f64>,
    pub final_norm: Option<f64>,
    pub all_in_g: Option<bool>,
}

/// Runs `run` once per value of the dotted key `param`, in parallel on
/// `workers` threads, each in its own subdirectory. Returns the worst
/// status of the individual runs.
pub fn sweep(base: &str, param: &str, values: &[String], out: &Path, workers: usize) -> Result<Status, CliError> {
    if values.is_empty() {
        return Err(CliError::Config("--values: at least one value is required".into()));
    }
    let configs = values
        .iter()
        .map(|v| RunConfig::with_override(base, param, v))
        .collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("--workers: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(index, cfg)| {
                let dir = out.join(format!("run_{index:03}"));
                let exit_code = match run(cfg, &dir) {
                    Ok(s) => s.code(),
                    Err(e) => {
                        warn!("run {index} ({param} = {}): {e}", values[index]);
                        e.status().code()
                    }
                };
                let summary: Option<serde_json::Value> = fs::read_to_string(dir.join(crate::output::SUMMARY_FILE))
                    .ok()
                    .and_then(|t| serde_json::from_str(&t).ok());
                let field = |k: &str| summary.as_ref().and_then(|s| s.get(k).cloned());
                SweepRow {
                    index,
                    value: values[index].clone(),
                    exit_code,
                    status: field("status").and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                    outer_iterations: field("outer_iterations").and_then(|v| v.as_u64()).unwrap_or(0) as usize,
                    final_ratio: field("final_ratio").and_then(|v| v.as_f64()),
                    final_norm: field("final_norm").and_then(|v| v.as_f64()),
                    all_in_g: summary
                        .as_ref()
                        .and_then(|s| s.pointer("/verdicts/all_in_g"))
                        .and_then(|v| v.as_bool()),
                }
            })
            .collect()
    });
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:e}"));
    let mut csv = format!("index,{param},exit_code,status,outer_iterations,final_ratio,final_norm,all_in_g\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.index,
            r.value,
            r.exit_code,
            r.status,
            r.outer_iterations,
            opt(r.final_ratio),
            opt(r.final_norm),
            r.all_in_g.map_or_else(String::new, |b| b.to_string())
        );
    }
    write_atomic(&out.join("sweep.csv"), csv.as_bytes())?;
    let worst = rows.iter().map(|r| r.exit_code).max().unwrap_or(0);
    Ok(match worst {
        0 => Status::Success,
        2 => Status::ConfigError,
        3 => Status::SolverFailure,
        _ => Status::VerificationFailure,
    })
}
