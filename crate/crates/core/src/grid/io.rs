//! Field snapshots (text header + raw little-endian `f64`) and legacy VTK
//! export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{GridSpec, ScalarField, VelocityField};
use crate::error::{Error, Result};

const MAGIC: &str = "keps-nullctl-snapshot";
const END: &str = "end_header";

/// Writes `bytes` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotData {
    Scalar(ScalarField),
    Velocity(VelocityField),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub t: f64,
    pub data: SnapshotData,
}

fn encode(grid: &GridSpec, t: f64, kind: &str, values: &[&[f64]]) -> Vec<u8> {
    let count: usize = values.iter().map(|v| v.len()).sum();
    let mut header = String::new();
    let _ = writeln!(header, "format = {MAGIC}");
    let _ = writeln!(header, "version = 1");
    let _ = writeln!(header, "kind = {kind}");
    let _ = writeln!(header, "nx = {}", grid.nx);
    let _ = writeln!(header, "ny = {}", grid.ny);
    let _ = writeln!(header, "lx = {:e}", grid.lx);
    let _ = writeln!(header, "ly = {:e}", grid.ly);
    let _ = writeln!(header, "t = {t:e}");
    let _ = writeln!(header, "count = {count}");
    let _ = writeln!(header, "{END}");
    let mut bytes = header.into_bytes();
    bytes.reserve(8 * count);
    for block in values {
        for v in *block {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

pub fn write_scalar_snapshot(path: &Path, grid: &GridSpec, field: &ScalarField, t: f64) -> Result<()> {
    field.check(grid)?;
    write_atomic(path, &encode(grid, t, "scalar", &[field.as_slice()]))
}

pub fn write_velocity_snapshot(path: &Path, grid: &GridSpec, field: &VelocityField, t: f64) -> Result<()> {
    field.check(grid)?;
    write_atomic(path, &encode(grid, t, "velocity", &[field.ux(), field.uy()]))
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Shape(format!("malformed snapshot: {}", msg.into()))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let bytes = fs::read(path)?;
    let marker = format!("{END}\n");
    let pos = bytes
        .windows(marker.len())
        .position(|w| w == marker.as_bytes())
        .ok_or_else(|| bad("missing end of header"))?;
    let header = std::str::from_utf8(&bytes[..pos]).map_err(|_| bad("header is not utf-8"))?;
    let body = &bytes[pos + marker.len()..];

    let mut kv = std::collections::HashMap::new();
    for line in header.lines() {
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("line `{line}`")))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| kv.get(k).ok_or_else(|| bad(format!("missing key `{k}`")));
    if get("format")? != MAGIC {
        return Err(bad("unknown format"));
    }
    let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(format!("key `{k}`"))) };
    let int = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(format!("key `{k}`"))) };
    let (nx, ny, count) = (int("nx")?, int("ny")?, int("count")?);
    let (lx, ly, t) = (num("lx")?, num("ly")?, num("t")?);
    if body.len() != 8 * count {
        return Err(bad(format!("expected {} data bytes, found {}", 8 * count, body.len())));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let grid = GridSpec { nx, ny, lx, ly, nt: 1, t_final: 1.0 };
    let data = match get("kind")?.as_str() {
        "scalar" => SnapshotData::Scalar(ScalarField::from_vec(&grid, values)?),
        "velocity" => {
            if count != grid.n_ux() + grid.n_uy() {
                return Err(bad("velocity length"));
            }
            let uy = values[grid.n_ux()..].to_vec();
            let mut ux = values;
            ux.truncate(grid.n_ux());
            SnapshotData::Velocity(VelocityField::from_components(&grid, ux, uy)?)
        }
        other => return Err(bad(format!("unknown kind `{other}`"))),
    };
    Ok(Snapshot { nx, ny, lx, ly, t, data })
}

/// Legacy ASCII VTK (`STRUCTURED_POINTS`) with cell data. Velocity is
/// averaged to cell centers.
pub fn write_vtk(
    path: &Path,
    grid: &GridSpec,
    scalars: &[(&str, &ScalarField)],
    velocity: Option<&VelocityField>,
) -> Result<()> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "keps-nullctl fields");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {} {} 1", nx + 1, ny + 1);
    let _ = writeln!(s, "ORIGIN 0 0 0");
    let _ = writeln!(s, "SPACING {:e} {:e} 1", grid.dx(), grid.dy());
    let _ = writeln!(s, "CELL_DATA {}", nx * ny);
    for (name, f) in scalars {
        f.check(grid)?;
        let _ = writeln!(s, "SCALARS {name} double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for v in f.as_slice() {
            let _ = writeln!(s, "{v:e}");
        }
    }
    if let Some(v) = velocity {
        v.check(grid)?;
        let _ = writeln!(s, "VECTORS velocity double");
        for j in 0..ny {
            for i in 0..nx {
                let u = 0.5 * (v.ux_at(i, j) + v.ux_at(i + 1, j));
                let w = 0.5 * (v.uy_at(i, j) + v.uy_at(i, j + 1));
                let _ = writeln!(s, "{u:e} {w:e} 0");
            }
        }
    }
    write_atomic(path, s.as_bytes())
}
