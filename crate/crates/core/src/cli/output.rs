//! Trajectory and summary files.
//!
//! Trajectories are comma-separated with a header row
//! `k,t,x_0..,xdot_0..,V,phase,tau,clamped`; floats are written in Rust's
//! shortest round-trip form so a reader recovers every bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{step_statistics, Phase, SampleRecord, StepStats, Trajectory};
use crate::trigger::Strategy;

/// Per-run statistics written by `run` and as rows of `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub strategy: Strategy,
    pub alpha: f64,
    pub epsilon: f64,
    pub t0: f64,
    pub tf: f64,
    /// Trigger-chosen steps; the final step clamped to `tf` is not counted.
    pub samples: usize,
    /// Rows in the trajectory file, including a clamped final step.
    pub records: usize,
    pub mean_step: f64,
    pub std_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// `‖x(tf) − x*(tf)‖₂`.
    pub final_tracking_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_switch_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_switch_time: Option<f64>,
    /// `max ‖x − x*‖₂` over the hold phase (ε-sweeps only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hold_max_tracking_error: Option<f64>,
    pub wall_time_s: f64,
}

impl RunSummary {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("summaries serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("bad summary: {e}")))
    }

    /// The summary with its wall time zeroed, for exact comparisons.
    pub fn without_timing(&self) -> Self {
        Self { wall_time_s: 0.0, ..self.clone() }
    }
}

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io_err = |e: std::io::Error| Error::InvalidConfig(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path.file_name().ok_or_else(|| Error::InvalidConfig(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io_err)?;
    f.write_all(contents).and_then(|_| f.sync_all()).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn trajectory_header(dim: usize) -> Vec<String> {
    let mut h = vec!["k".to_string(), "t".to_string()];
    h.extend((0..dim).map(|i| format!("x_{i}")));
    h.extend((0..dim).map(|i| format!("xdot_{i}")));
    h.extend(["V", "phase", "tau", "clamped"].map(String::from));
    h
}

pub fn trajectory_csv(traj: &Trajectory) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(trajectory_header(traj.dim)).expect("in-memory write");
    for r in &traj.records {
        let mut row = vec![r.k.to_string(), r.t.to_string()];
        row.extend(r.x.iter().map(f64::to_string));
        row.extend(r.xdot.iter().map(f64::to_string));
        row.push(r.v.to_string());
        row.push(r.phase.as_str().to_string());
        row.push(r.tau.to_string());
        row.push(r.clamped.to_string());
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Parses a trajectory file back into sample records.
pub fn read_trajectory(path: &Path) -> Result<Vec<SampleRecord>> {
    let bad = |msg: String| Error::InvalidConfig(format!("{}: {msg}", path.display()));
    let mut rd = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.len() < 6 || (header.len() - 6) % 2 != 0 {
        return Err(bad(format!("unexpected header with {} columns", header.len())));
    }
    let dim = (header.len() - 6) / 2;
    if header.iter().collect::<Vec<_>>() != trajectory_header(dim) {
        return Err(bad("unexpected header".into()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| &rec[i];
        let k = field(0).parse().map_err(|e| bad(format!("k: {e}")))?;
        let t = num(field(1))?;
        let x = (0..dim).map(|i| num(field(2 + i))).collect::<Result<Vec<_>>>()?;
        let xdot = (0..dim).map(|i| num(field(2 + dim + i))).collect::<Result<Vec<_>>>()?;
        out.push(SampleRecord {
            k,
            t,
            x: DVector::from_vec(x),
            xdot: DVector::from_vec(xdot),
            v: num(field(2 + 2 * dim))?,
            phase: field(3 + 2 * dim).parse()?,
            tau: num(field(4 + 2 * dim))?,
            clamped: field(5 + 2 * dim).parse().map_err(|e| bad(format!("clamped: {e}")))?,
        });
    }
    Ok(out)
}

/// Step statistics and the phase switch recomputed from trajectory rows.
pub fn recompute_statistics(rows: &[SampleRecord]) -> (StepStats, Option<usize>, Option<f64>) {
    let steps: Vec<f64> = rows.iter().filter(|r| !r.clamped).map(|r| r.tau).collect();
    let switch = rows.iter().find(|r| r.phase == Phase::Hold);
    (step_statistics(&steps), switch.map(|r| r.k), switch.map(|r| r.t))
}
