//! Trajectory CSV and atomic file output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use transhape_core::Trajectory;

use crate::error::{CliError, Result};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// `out.csv` with suffix `a` becomes `out-a.csv`.
pub fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{suffix}"),
    };
    path.with_file_name(name)
}

/// Header `t,x_1,…,x_n,u,y,e,int_e`.
pub fn csv_header(state_dim: usize) -> String {
    let mut h = String::from("t");
    for i in 1..=state_dim {
        let _ = write!(h, ",x_{i}");
    }
    h.push_str(",u,y,e,int_e");
    h
}

/// Renders a trajectory with shortest round-trip numbers.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = csv_header(traj.state_dim());
    out.push('\n');
    for i in 0..traj.len() {
        let _ = write!(out, "{:?}", traj.times[i]);
        for v in &traj.states[i] {
            let _ = write!(out, ",{v:?}");
        }
        let _ = writeln!(out, ",{:?},{:?},{:?},{:?}", traj.controls[i], traj.outputs[i], traj.errors[i], traj.error_integral[i]);
    }
    out
}

/// Columns of a parsed trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTrajectory {
    /// Sample times.
    pub times: Vec<f64>,
    /// Plant states.
    pub states: Vec<Vec<f64>>,
    /// Control input.
    pub controls: Vec<f64>,
    /// Output.
    pub outputs: Vec<f64>,
    /// Tracking error.
    pub errors: Vec<f64>,
    /// Running error integral.
    pub error_integral: Vec<f64>,
}

impl CsvTrajectory {
    /// True when every sample equals the trajectory's, bit for bit.
    pub fn matches(&self, traj: &Trajectory) -> bool {
        self.times == traj.times
            && self.states == traj.states
            && self.controls == traj.controls
            && self.outputs == traj.outputs
            && self.errors == traj.errors
            && self.error_integral == traj.error_integral
    }
}

/// Parses the output of [`trajectory_csv`].
pub fn parse_trajectory_csv(text: &str) -> Result<CsvTrajectory> {
    let bad = |line: usize, msg: String| CliError::Config(format!("csv line {line}: {msg}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    let cols = header.split(',').count();
    if cols < 6 {
        return Err(bad(1, format!("expected at least 6 columns, got {cols}")));
    }
    let n = cols - 5;
    if header != csv_header(n) {
        return Err(bad(1, format!("unexpected header `{header}`")));
    }
    let mut out = CsvTrajectory { times: vec![], states: vec![], controls: vec![], outputs: vec![], errors: vec![], error_integral: vec![] };
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(i + 2, e.to_string()))?;
        if row.len() != cols {
            return Err(bad(i + 2, format!("expected {cols} fields, got {}", row.len())));
        }
        out.times.push(row[0]);
        out.states.push(row[1..=n].to_vec());
        out.controls.push(row[n + 1]);
        out.outputs.push(row[n + 2]);
        out.errors.push(row[n + 3]);
        out.error_integral.push(row[n + 4]);
    }
    Ok(out)
}
