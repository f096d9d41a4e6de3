//! Experiment runner: evolve runs with CSV/JSON artifacts, check suites and
//! calibration tables. Every file is written to a temporary sibling and
//! renamed into place.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::checks::{run_suite, CheckReport, Suite};
use crate::config::ExperimentConfig;
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::exec::parallel_enabled;
use crate::field::GridFunction;
use crate::flow::{evolve, FlowFormulation, FlowState};
use crate::frac::{calibration, install_calibration, Calibration};

/// Overrides the output directory of every subcommand.
pub const OUTPUT_DIR_ENV: &str = "HALFFLOW_OUTPUT_DIR";

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit status for an error: 2 configuration, 3 numerical failure,
/// 1 I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. }
        | Error::InvalidGridSize(_)
        | Error::InvalidParameter { .. }
        | Error::SizeMismatch(_)
        | Error::NotAHypersurface
        | Error::NotASphere
        | Error::OffManifold { .. }
        | Error::Json(_) => 2,
        Error::NonFiniteInput { .. }
        | Error::OutsideTube { .. }
        | Error::FlowLeftTube { .. }
        | Error::NotOnSphere { .. }
        | Error::NewtonFailure { .. }
        | Error::NonFinite { .. }
        | Error::ConstraintBlowup { .. } => 3,
        Error::Io(_) => 1,
    }
}

/// `fallback`, unless the environment override is set.
pub fn resolve_output_dir(fallback: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => fallback.to_path_buf(),
    }
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Fixed 17-significant-digit scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn radius_label(r: f64) -> String {
    format!("eps_R_{r}")
}

/// Column names of `trajectory.csv` for a run.
pub fn trajectory_columns(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let mut cols: Vec<String> = ["t", "energy", "constraint_violation", "harmonic_residual"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend(cfg.record.radii.iter().map(|&r| radius_label(r)));
    cols.push("oscillation".into());
    if cfg.record.formulation_gaps {
        let n = cfg.manifold()?;
        for f in FlowFormulation::ALL.into_iter().skip(1) {
            if f.applies_to(&n) {
                cols.push(format!("gap_{f}"));
            }
        }
    }
    Ok(cols)
}

fn csv_row(r: &DiagnosticsRecord) -> String {
    let mut fields = vec![
        fmt_f64(r.t),
        fmt_f64(r.energy),
        fmt_f64(r.constraint_violation),
        fmt_f64(r.harmonic_residual),
    ];
    fields.extend(r.eps_r.iter().map(|&(_, e)| fmt_f64(e)));
    fields.push(fmt_f64(r.oscillation));
    fields.extend(r.formulation_gaps.iter().map(|(_, g)| fmt_f64(*g)));
    fields.join(",")
}

fn snapshot_csv(u: &GridFunction) -> String {
    let mut s = String::from("x");
    for c in 0..u.dim() {
        let _ = write!(s, ",u{c}");
    }
    s.push('\n');
    for (j, row) in u.rows().enumerate() {
        s.push_str(&fmt_f64(u.grid().node(j)));
        for v in row {
            s.push(',');
            s.push_str(&fmt_f64(*v));
        }
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub code_version: String,
    pub entries: Vec<Calibration>,
}

impl CalibrationTable {
    pub fn find(&self, s: f64, m: usize) -> Option<Calibration> {
        self.entries.iter().copied().find(|c| c.s == s && c.m == m)
    }
}

/// Where the constants of a run came from.
#[derive(Clone, Debug, Serialize)]
pub struct CalibrationSource {
    pub constants: Calibration,
    pub source: &'static str,
    pub file: PathBuf,
    pub note: Option<String>,
}

/// Use the (1/2, M) entry of the table at `path` when present, otherwise
/// calibrate on the fly and say so.
pub fn load_or_compute_calibration(path: &Path, m: usize) -> Result<CalibrationSource> {
    let table = match std::fs::read(path) {
        Ok(bytes) => Some(
            serde_json::from_slice::<CalibrationTable>(&bytes)
                .map_err(|e| Error::config("calibration.file", format!("{}: {e}", path.display())))?,
        ),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    let (source, note) = match table.as_ref().and_then(|t| t.find(0.5, m)) {
        Some(entry) => {
            install_calibration(entry).map_err(|e| Error::config("calibration.file", e.to_string()))?;
            ("file", None)
        }
        None => {
            let why = if table.is_some() {
                format!("{} has no entry for s = 0.5, M = {m}", path.display())
            } else {
                format!("{} not found", path.display())
            };
            ("computed", Some(format!("{why}; constants calibrated on the fly")))
        }
    };
    Ok(CalibrationSource {
        constants: calibration(0.5, m)?,
        source,
        file: path.to_path_buf(),
        note,
    })
}

/// Result of a completed `evolve` run.
#[derive(Clone, Debug)]
pub struct EvolveSummary {
    pub output_dir: PathBuf,
    pub records: Vec<DiagnosticsRecord>,
    pub final_u: GridFunction,
    pub wall_time: f64,
}

/// Run the configured flow and write `trajectory.csv`, `manifest.json` and
/// any requested snapshots. On a solver failure the rows recorded so far and
/// a manifest with the error are still written before the error is returned.
pub fn run_evolve(cfg: &ExperimentConfig) -> Result<EvolveSummary> {
    let start = Instant::now();
    let dir = resolve_output_dir(&cfg.output_dir);
    let n = cfg.manifold()?;
    let grid = cfg.grid();
    let cal = load_or_compute_calibration(&cfg.calibration_file, cfg.m)?;
    let u0 = cfg.initial.generate(grid, &n)?;
    let columns = trajectory_columns(cfg)?;

    let snapshot_steps: Vec<usize> = cfg
        .snapshot_times
        .iter()
        .map(|t| (t / cfg.solver.dt).round() as usize)
        .collect();
    let mut written = vec![false; snapshot_steps.len()];
    let mut snapshot_files = Vec::new();
    let mut rows = Vec::new();

    let outcome = evolve(u0, &n, cfg.formulation, &cfg.solver, &cfg.record, |state: &FlowState, rec| {
        rows.push(csv_row(rec));
        for (k, &target) in snapshot_steps.iter().enumerate() {
            if !written[k] && state.step_count >= target {
                written[k] = true;
                let name = format!("snapshots/u_step{:07}.csv", state.step_count);
                write_atomic(&dir.join(&name), snapshot_csv(&state.u).as_bytes())?;
                snapshot_files.push(json!({ "requested_t": cfg.snapshot_times[k], "t": state.t, "file": name }));
            }
        }
        Ok(())
    });

    let mut csv = columns.join(",");
    csv.push('\n');
    for r in &rows {
        csv.push_str(r);
        csv.push('\n');
    }
    write_atomic(&dir.join("trajectory.csv"), csv.as_bytes())?;

    let wall_time = start.elapsed().as_secs_f64();
    let (status, error) = match &outcome {
        Ok(_) => ("ok", None),
        Err(e) => ("failed", Some(e.to_string())),
    };
    let manifest = json!({
        "code_version": CODE_VERSION,
        "status": status,
        "error": error,
        "wall_time_seconds": wall_time,
        "parallel": parallel_enabled(),
        "config": cfg.raw,
        "resolved_config": cfg,
        "manifold": n.name(),
        "tube_radius": n.tube_radius(),
        "safe_radius": n.safe_radius(),
        "calibration": cal,
        "steps": cfg.solver.steps(),
        "records": rows.len(),
        "trajectory_columns": columns,
        "trajectory_format": "one row per recorded level; 17 significant digits, scientific notation",
        "snapshots": snapshot_files,
    });
    write_atomic(&dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())?;

    let traj = outcome?;
    Ok(EvolveSummary {
        output_dir: dir,
        records: traj.records,
        final_u: traj.final_state.u,
        wall_time,
    })
}

/// Run a check suite; with `report` set, also write the JSON report there.
pub fn run_check(suite: Suite, m: usize, seed: u64, report: Option<&Path>) -> Result<CheckReport> {
    let r = run_suite(suite, m, seed)?;
    if let Some(path) = report {
        write_atomic(path, serde_json::to_string_pretty(&r)?.as_bytes())?;
    }
    Ok(r)
}

/// Calibrate every (s, M) pair and write `calibration.json` into `dir`.
pub fn run_calibrate(s_list: &[f64], m_list: &[usize], dir: &Path) -> Result<CalibrationTable> {
    if s_list.is_empty() || m_list.is_empty() {
        return Err(Error::config("calibrate", "need at least one s and one M"));
    }
    let mut entries = Vec::new();
    for &s in s_list {
        for &m in m_list {
            entries.push(calibration(s, m)?);
        }
    }
    let table = CalibrationTable {
        code_version: CODE_VERSION.to_string(),
        entries,
    };
    write_atomic(&dir.join("calibration.json"), serde_json::to_string_pretty(&table)?.as_bytes())?;
    Ok(table)
}
