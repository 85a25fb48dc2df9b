//! Persistence: CSV fields, binary checkpoints, trajectories and run directories.
//!
//! Checkpoint layout: the 8-byte magic `TVFLOWCK`, a little-endian `u32`
//! header length, a JSON header, then every field as little-endian `f64`s in
//! header order. CSV files hold one row per cell (cell coordinates first);
//! floats are written in shortest round-trip form, so CSV round trips are exact.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::datum::make_datum;
use crate::error::{Error, Result};
use crate::flow::{run_flow_with, EpsSchedule, StepRecord, Trajectory};
use crate::grid::{Density, ScalarField, TorusGrid, VectorField};
use crate::jko::JkoStepResult;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TVFLOWCK";
pub const FORMAT_VERSION: u32 = 1;

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Parse(format!("{other:?}")),
    }
}

fn coord_headers(dim: usize) -> Vec<&'static str> {
    ["i", "j"][..dim].to_vec()
}

/// Writes one row per cell: coordinates, then one column per entry of `columns`.
fn write_cells(path: &Path, grid: TorusGrid, names: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = coord_headers(grid.dim());
    header.extend_from_slice(names);
    w.write_record(&header).map_err(csv_err)?;
    for idx in 0..grid.len() {
        let c = grid.coords(idx);
        let mut row: Vec<String> = c[..grid.dim()].iter().map(|v| v.to_string()).collect();
        row.extend(columns.iter().map(|col| col[idx].to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a cell table; infers the grid from the coordinate columns.
fn read_cells(path: &Path, ncols: usize) -> Result<(TorusGrid, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    let dim = headers.iter().take_while(|h| *h == "i" || *h == "j").count();
    if !(dim == 1 || dim == 2) || headers.len() != dim + ncols {
        return Err(Error::Parse(format!(
            "{}: expected {} value column(s) after the cell coordinates, got header {:?}",
            path.display(),
            ncols,
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let mut c = [0usize; 2];
        for d in 0..dim {
            c[d] = rec[d].trim().parse().map_err(|e| Error::Parse(format!("{}: coordinate: {e}", path.display())))?;
        }
        let vals: Vec<f64> = (0..ncols)
            .map(|k| rec[dim + k].trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("{}: value: {e}", path.display())))?;
        rows.push((c, vals));
    }
    let len = rows.len();
    let n = match dim {
        1 => len,
        _ => (len as f64).sqrt().round() as usize,
    };
    let grid = TorusGrid::new(dim, n)?;
    if grid.len() != len {
        return Err(Error::Parse(format!("{}: {len} rows do not form a square grid", path.display())));
    }
    let mut cols = vec![vec![f64::NAN; len]; ncols];
    let mut seen = vec![false; len];
    for (c, vals) in rows {
        if c[..dim].iter().any(|&v| v >= n) {
            return Err(Error::Parse(format!("{}: coordinate {:?} out of range", path.display(), &c[..dim])));
        }
        let idx = grid.index(c);
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::Parse(format!("{}: duplicate cell {:?}", path.display(), &c[..dim])));
        }
        for (k, v) in vals.into_iter().enumerate() {
            cols[k][idx] = v;
        }
    }
    Ok((grid, cols))
}

pub fn write_scalar_csv(path: &Path, field: &ScalarField) -> Result<()> {
    write_cells(path, *field.grid(), &["value"], &[field.values()])
}

pub fn read_scalar_csv(path: &Path) -> Result<ScalarField> {
    let (g, mut cols) = read_cells(path, 1)?;
    ScalarField::new(g, cols.remove(0))
}

pub fn write_density_csv(path: &Path, rho: &Density) -> Result<()> {
    write_scalar_csv(path, rho.field())
}

pub fn read_density_csv(path: &Path) -> Result<Density> {
    Density::from_field(read_scalar_csv(path)?)
}

pub fn write_vector_csv(path: &Path, z: &VectorField) -> Result<()> {
    let g = *z.grid();
    let names = ["z0", "z1"];
    let cols: Vec<&[f64]> = (0..g.dim()).map(|d| z.component(d)).collect();
    write_cells(path, g, &names[..g.dim()], &cols)
}

pub fn read_vector_csv(path: &Path) -> Result<VectorField> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let dim = r.headers().map_err(csv_err)?.iter().filter(|h| *h == "i" || *h == "j").count();
    let (g, cols) = read_cells(path, dim.max(1))?;
    VectorField::new(g, cols)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FieldEntry {
    name: String,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    version: u32,
    kind: String,
    grid: TorusGrid,
    fields: Vec<FieldEntry>,
    #[serde(default)]
    scalars: serde_json::Map<String, serde_json::Value>,
}

fn write_checkpoint(path: &Path, header: &Header, data: &[&[f64]]) -> Result<()> {
    let json = serde_json::to_vec(header).map_err(|e| Error::Parse(e.to_string()))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for f in data {
        for v in *f {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_checkpoint(path: &Path, kind: &str) -> Result<(Header, Vec<Vec<f64>>)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |m: String| Error::FormatVersionMismatch(format!("{}: {m}", path.display()));
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("missing checkpoint magic".into()));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = &bytes[12..];
    if body.len() < hlen {
        return Err(bad("truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| bad(format!("header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(bad(format!("version {} (expected {FORMAT_VERSION})", header.version)));
    }
    if header.kind != kind {
        return Err(bad(format!("holds a `{}`, expected `{kind}`", header.kind)));
    }
    let blob = &body[hlen..];
    let total: usize = header.fields.iter().map(|f| f.len).sum();
    if blob.len() != 8 * total {
        return Err(bad(format!("payload of {} bytes, expected {}", blob.len(), 8 * total)));
    }
    let mut out = Vec::with_capacity(header.fields.len());
    let mut off = 0;
    for f in &header.fields {
        let v = blob[off..off + 8 * f.len]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        off += 8 * f.len;
        out.push(v);
    }
    Ok((header, out))
}

fn header(kind: &str, grid: TorusGrid, fields: &[(&str, usize)]) -> Header {
    Header {
        version: FORMAT_VERSION,
        kind: kind.into(),
        grid,
        fields: fields
            .iter()
            .map(|&(n, l)| FieldEntry {
                name: n.into(),
                len: l,
            })
            .collect(),
        scalars: Default::default(),
    }
}

pub fn save_density(path: &Path, rho: &Density) -> Result<()> {
    let g = *rho.grid();
    write_checkpoint(path, &header("density", g, &[("rho", g.len())]), &[rho.values()])
}

pub fn load_density(path: &Path) -> Result<Density> {
    let (h, mut f) = read_checkpoint(path, "density")?;
    Density::new(h.grid, f.remove(0))
}

pub fn save_vector_field(path: &Path, z: &VectorField) -> Result<()> {
    let g = *z.grid();
    write_checkpoint(path, &header("vector", g, &[("z", z.flat().len())]), &[z.flat()])
}

pub fn load_vector_field(path: &Path) -> Result<VectorField> {
    let (h, mut f) = read_checkpoint(path, "vector")?;
    let flat = f.remove(0);
    let d = h.grid.dim();
    let comps = flat.chunks(h.grid.len()).map(|c| c.to_vec()).collect::<Vec<_>>();
    if comps.len() != d {
        return Err(Error::FormatVersionMismatch(format!("{}: wrong component count", path.display())));
    }
    VectorField::new(h.grid, comps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct StepScalars {
    residual_dev: f64,
    objective_value: f64,
    energy_decrease: f64,
    w2_squared: f64,
    outer_iterations: usize,
    transport_evaluations: usize,
    final_sigma: f64,
    converged: bool,
}

pub fn save_step(path: &Path, s: &JkoStepResult) -> Result<()> {
    let g = *s.rho_next.grid();
    let n = g.len();
    let mut h = header(
        "step",
        g,
        &[("rho", n), ("z", s.z.flat().len()), ("phi", n), ("residual", n)],
    );
    let sc = StepScalars {
        residual_dev: s.residual_dev,
        objective_value: s.objective_value,
        energy_decrease: s.energy_decrease,
        w2_squared: s.w2_squared,
        outer_iterations: s.outer_iterations,
        transport_evaluations: s.transport_evaluations,
        final_sigma: s.final_sigma,
        converged: s.converged,
    };
    // floats travel bitwise in the blob, not through JSON text
    h.scalars.insert("outer_iterations".into(), sc.outer_iterations.into());
    h.scalars.insert("transport_evaluations".into(), sc.transport_evaluations.into());
    h.scalars.insert("converged".into(), sc.converged.into());
    h.fields.push(FieldEntry {
        name: "scalars".into(),
        len: 5,
    });
    let scal = [sc.residual_dev, sc.objective_value, sc.energy_decrease, sc.w2_squared, sc.final_sigma];
    write_checkpoint(
        path,
        &h,
        &[s.rho_next.values(), s.z.flat(), s.phi.values(), s.residual_field.values(), &scal],
    )
}

pub fn load_step(path: &Path) -> Result<JkoStepResult> {
    let (h, f) = read_checkpoint(path, "step")?;
    let bad = || Error::FormatVersionMismatch(format!("{}: malformed step checkpoint", path.display()));
    if f.len() != 5 || f[4].len() != 5 {
        return Err(bad());
    }
    let g = h.grid;
    let int = |k: &str| h.scalars.get(k).and_then(|v| v.as_u64()).map(|v| v as usize).ok_or_else(bad);
    let comps = f[1].chunks(g.len()).map(|c| c.to_vec()).collect::<Vec<_>>();
    Ok(JkoStepResult {
        rho_next: Density::new(g, f[0].clone())?,
        z: VectorField::new(g, comps)?,
        phi: ScalarField::new(g, f[2].clone())?,
        residual_field: ScalarField::new(g, f[3].clone())?,
        residual_dev: f[4][0],
        objective_value: f[4][1],
        energy_decrease: f[4][2],
        w2_squared: f[4][3],
        final_sigma: f[4][4],
        outer_iterations: int("outer_iterations")?,
        transport_evaluations: int("transport_evaluations")?,
        converged: h.scalars.get("converged").and_then(|v| v.as_bool()).ok_or_else(bad)?,
    })
}

/// Columns of `trajectory.csv`.
pub const TRAJECTORY_COLUMNS: [&str; 8] = ["k", "t", "J", "min", "max", "w2_step", "residual_dev", "dissipation"];

fn trajectory_row(r: &StepRecord) -> [String; 8] {
    [
        r.k.to_string(),
        r.t.to_string(),
        r.j.to_string(),
        r.min.to_string(),
        r.max.to_string(),
        r.w2_step.to_string(),
        r.residual_dev.to_string(),
        r.dissipation.to_string(),
    ]
}

/// Metadata stored next to a persisted trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrajectoryMeta {
    version: u32,
    grid: TorusGrid,
    tau: f64,
    c: f64,
    schedule: EpsSchedule,
    seed: Option<u64>,
    records: Vec<StepRecord>,
}

pub fn snapshot_name(k: usize) -> String {
    format!("snapshot_{k:05}.tvck")
}

/// Writes `trajectory.csv`, `trajectory.json` and one checkpoint per snapshot into `dir`.
pub fn save_trajectory(dir: &Path, traj: &Trajectory) -> Result<()> {
    fs::create_dir_all(dir.join("snapshots"))?;
    let mut w = csv::Writer::from_path(dir.join("trajectory.csv")).map_err(csv_err)?;
    w.write_record(TRAJECTORY_COLUMNS).map_err(csv_err)?;
    for r in &traj.records {
        w.write_record(trajectory_row(r)).map_err(csv_err)?;
    }
    w.flush()?;
    let meta = TrajectoryMeta {
        version: FORMAT_VERSION,
        grid: traj.grid,
        tau: traj.tau,
        c: traj.c,
        schedule: traj.schedule,
        seed: traj.seed,
        records: traj.records.clone(),
    };
    write_json(&dir.join("trajectory.json"), &meta)?;
    save_density(&dir.join("snapshots").join(snapshot_name(0)), &traj.initial)?;
    for (k, s) in traj.steps.iter().enumerate() {
        save_step(&dir.join("snapshots").join(snapshot_name(k + 1)), s)?;
    }
    Ok(())
}

pub fn load_trajectory(dir: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(dir.join("trajectory.json"))?;
    let meta: TrajectoryMeta =
        serde_json::from_str(&text).map_err(|e| Error::FormatVersionMismatch(format!("trajectory.json: {e}")))?;
    if meta.version != FORMAT_VERSION {
        return Err(Error::FormatVersionMismatch(format!("trajectory version {}", meta.version)));
    }
    if meta.records.is_empty() {
        return Err(Error::FormatVersionMismatch("trajectory without records".into()));
    }
    let snap = dir.join("snapshots");
    let initial = load_density(&snap.join(snapshot_name(0)))?;
    let steps = (1..meta.records.len())
        .map(|k| load_step(&snap.join(snapshot_name(k))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        grid: meta.grid,
        tau: meta.tau,
        c: meta.c,
        schedule: meta.schedule,
        seed: meta.seed,
        initial,
        steps,
        records: meta.records,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Creates `dir`; an existing directory is only reused with `force`.
pub fn prepare_output_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        if !force {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!("{} exists (use --force to overwrite)", dir.display()),
            )));
        }
        if dir.is_dir() {
            fs::remove_dir_all(dir)?;
        } else {
            fs::remove_file(dir)?;
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureInfo {
    pub kind: String,
    pub message: String,
    pub step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFile {
    pub k: usize,
    pub file: String,
}

/// `manifest.json` of a run directory; the only file carrying timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub tvflow_version: String,
    pub format_version: u32,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub status: RunStatus,
    /// ε decreasing inside the flow has no theoretical counterpart.
    pub experimental: bool,
    /// The unpenalised scheme (ε = 0): results probe an open question only.
    #[serde(default)]
    pub exploratory: bool,
    pub alpha: f64,
    pub beta: f64,
    pub steps: Vec<StepFile>,
    pub failure: Option<FailureInfo>,
}

/// Result of [`execute_run`].
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub trajectory: Trajectory,
    pub manifest: RunManifest,
    /// Set when the flow stopped early; the trajectory is then partial.
    pub error: Option<Error>,
}

/// Runs the flow described by `cfg` into `dir`: `manifest.json` is written
/// before the first step and finalised at exit, `trajectory.csv` grows one
/// row per step, and each snapshot gets a checkpoint.
pub fn execute_run(cfg: &RunConfig, dir: &Path, force: bool) -> Result<RunOutcome> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let datum = make_datum(&cfg.datum, grid)?;
    let flow_cfg = cfg.flow_config()?;
    prepare_output_dir(dir, force)?;
    let snap = dir.join("snapshots");
    if cfg.output.checkpoints {
        fs::create_dir_all(&snap)?;
    }
    let mpath = dir.join("manifest.json");
    let mut manifest = RunManifest {
        config: cfg.clone(),
        tvflow_version: env!("CARGO_PKG_VERSION").into(),
        format_version: FORMAT_VERSION,
        started_unix: unix_now(),
        finished_unix: None,
        status: RunStatus::Running,
        experimental: flow_cfg.schedule.is_experimental(),
        exploratory: flow_cfg.schedule == EpsSchedule::constant(0.0),
        alpha: datum.alpha,
        beta: datum.beta,
        steps: Vec::new(),
        failure: None,
    };
    write_json(&mpath, &manifest)?;

    let mut csv_w = csv::Writer::from_path(dir.join("trajectory.csv")).map_err(csv_err)?;
    csv_w.write_record(TRAJECTORY_COLUMNS).map_err(csv_err)?;
    let mut io_error: Option<Error> = None;
    let mut files = Vec::new();
    let result = run_flow_with(&datum.density, &flow_cfg, |k, traj| {
        if io_error.is_some() {
            return;
        }
        let mut go = || -> Result<()> {
            csv_w.write_record(trajectory_row(&traj.records[k])).map_err(csv_err)?;
            csv_w.flush()?;
            if cfg.output.checkpoints {
                let name = format!("snapshots/{}", snapshot_name(k));
                if k == 0 {
                    save_density(&dir.join(&name), traj.density(0))?;
                } else {
                    save_step(&dir.join(&name), &traj.steps[k - 1])?;
                }
                files.push(StepFile { k, file: name });
            }
            Ok(())
        };
        if let Err(e) = go() {
            io_error = Some(e);
        }
    });
    drop(csv_w);
    manifest.steps = files;
    let (mut trajectory, error) = match result {
        Ok(t) => (t, None),
        Err(f) => (*f.partial, Some(f.error)),
    };
    trajectory.seed = cfg.datum.seed;
    if let Some(e) = io_error {
        manifest.status = RunStatus::Failed;
        manifest.failure = Some(FailureInfo {
            kind: e.kind().into(),
            message: e.to_string(),
            step: None,
        });
        manifest.finished_unix = Some(unix_now());
        write_json(&mpath, &manifest)?;
        return Err(e);
    }
    let meta = TrajectoryMeta {
        version: FORMAT_VERSION,
        grid: trajectory.grid,
        tau: trajectory.tau,
        c: trajectory.c,
        schedule: trajectory.schedule,
        seed: trajectory.seed,
        records: trajectory.records.clone(),
    };
    if cfg.output.checkpoints {
        write_json(&dir.join("trajectory.json"), &meta)?;
    }
    match &error {
        None => manifest.status = RunStatus::Complete,
        Some(e) => {
            manifest.status = RunStatus::Failed;
            let step = match e {
                Error::Step { step, .. } => Some(*step),
                _ => None,
            };
            manifest.failure = Some(FailureInfo {
                kind: e.kind().into(),
                message: e.to_string(),
                step,
            });
        }
    }
    manifest.finished_unix = Some(unix_now());
    write_json(&mpath, &manifest)?;
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        trajectory,
        manifest,
        error,
    })
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    serde_json::from_str(&text).map_err(|e| Error::FormatVersionMismatch(format!("manifest.json: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;
    use crate::flow::{run_flow, FlowConfig};

    #[test]
    fn density_checkpoint_is_bitwise() {
        let d = tempfile::tempdir().unwrap();
        let g = TorusGrid::new(2, 6).unwrap();
        let u = Density::uniform(g);
        let p = d.path().join("u.tvck");
        save_density(&p, &u).unwrap();
        assert_eq!(load_density(&p).unwrap(), u);
        let rho = Density::normalized(g, (0..36).map(|i| 1.0 + (i as f64).sin().abs() / 3.0).collect()).unwrap();
        save_density(&p, &rho).unwrap();
        let back = load_density(&p).unwrap();
        assert!(back.values().iter().zip(rho.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn csv_round_trip() {
        let d = tempfile::tempdir().unwrap();
        for dim in [1, 2] {
            let g = TorusGrid::new(dim, 5).unwrap();
            let f = ScalarField::from_fn(g, |x| (7.0 * x[0]).sin() + x[1] / 3.0);
            let p = d.path().join("f.csv");
            write_scalar_csv(&p, &f).unwrap();
            let back = read_scalar_csv(&p).unwrap();
            assert_eq!(back.grid(), f.grid());
            assert!(back.values().iter().zip(f.values()).all(|(a, b)| (a - b).abs() <= 1e-12));
            let z = VectorField::from_fn(g, |x| [x[0].cos(), x[1] - 0.25]);
            write_vector_csv(&p, &z).unwrap();
            assert_eq!(read_vector_csv(&p).unwrap(), z);
        }
    }

    #[test]
    fn truncated_checkpoints_are_rejected() {
        let d = tempfile::tempdir().unwrap();
        let g = TorusGrid::new(1, 16).unwrap();
        let p = d.path().join("u.tvck");
        save_density(&p, &Density::uniform(g)).unwrap();
        let bytes = fs::read(&p).unwrap();
        for cut in [0, 5, 11, 20, bytes.len() - 1] {
            fs::write(&p, &bytes[..cut]).unwrap();
            match load_density(&p) {
                Err(Error::FormatVersionMismatch(_)) | Err(Error::Io(_)) => {}
                other => panic!("cut {cut}: {other:?}"),
            }
        }
        let mut wrong = bytes.clone();
        let s = String::from_utf8_lossy(&wrong).replace("\"version\":1", "\"version\":9");
        wrong = s.into_bytes();
        fs::write(&p, &wrong).unwrap();
        assert!(matches!(load_density(&p), Err(Error::FormatVersionMismatch(_))));
    }

    #[test]
    fn trajectory_round_trip() {
        let g = TorusGrid::new(1, 16).unwrap();
        let rho0 = Density::new(g, (0..16).map(|i| if i < 8 { 1.5 } else { 0.5 }).collect()).unwrap();
        let t = run_flow(&rho0, &FlowConfig::new(1e-3, 3, 1e-3, 0.1)).unwrap();
        let d = tempfile::tempdir().unwrap();
        save_trajectory(d.path(), &t).unwrap();
        let back = load_trajectory(d.path()).unwrap();
        assert_eq!(back.records.len(), 4);
        for (a, b) in back.records.iter().zip(&t.records) {
            for (x, y) in [(a.t, b.t), (a.j, b.j), (a.min, b.min), (a.max, b.max), (a.w2_step, b.w2_step)] {
                assert!((x - y).abs() <= 1e-12);
            }
        }
        assert_eq!(back, t);
    }

    #[test]
    fn run_directory_lifecycle() {
        let cfg = parse_config_str(
            "[grid]\ndim = 1\nn = 16\n[datum]\npreset = \"step\"\n[time]\ntau = 1e-3\nsteps = 3\n[barrier]\neps = 1e-3\nc = 0.1\n",
        )
        .unwrap();
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("run");
        let out = execute_run(&cfg, &dir, false).unwrap();
        assert!(out.error.is_none());
        let m = read_manifest(&dir).unwrap();
        assert_eq!(m.status, RunStatus::Complete);
        assert_eq!(m.steps.len(), 4);
        let first = fs::read(dir.join("trajectory.csv")).unwrap();
        assert!(matches!(execute_run(&cfg, &dir, false), Err(Error::Io(_))));
        execute_run(&cfg, &dir, true).unwrap();
        assert_eq!(first, fs::read(dir.join("trajectory.csv")).unwrap());
        assert_eq!(load_trajectory(&dir).unwrap().records, out.trajectory.records);
    }

    #[test]
    fn failed_run_finalises_manifest() {
        let cfg = parse_config_str(
            "[grid]\ndim = 1\nn = 16\n[datum]\npreset = \"step\"\n[time]\ntau = 1e-3\nsteps = 3\n[barrier]\neps = 1e-3\nc = 0.1\n[solver]\nouter_iters = 1\n",
        )
        .unwrap();
        let root = tempfile::tempdir().unwrap();
        let out = execute_run(&cfg, &root.path().join("r"), false).unwrap();
        assert!(out.error.is_some());
        let m = read_manifest(&root.path().join("r")).unwrap();
        assert_eq!(m.status, RunStatus::Failed);
        assert_eq!(m.failure.unwrap().step, Some(1));
    }
}
