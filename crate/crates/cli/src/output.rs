// Copyright 2026 qfr contributors
// SPDX-License-Identifier: Apache-2.0

//! Snapshot, summary, and report files.
//!
//! Every floating-point value is printed with 17 significant digits
//! (`{:.16e}`), and all maps iterate in sorted order, so identical runs
//! produce byte-identical files.
//!
//! Snapshot CSV layout (v1), one row per occupied lattice point per step:
//!
//! ```text
//! # qfr snapshots v1 kind=<deterministic|ensemble> d=<hilbert> D=<signal>
//! step,index,y0,...,y{D-1},trace[,std_err][,bloch_x,bloch_y,bloch_z]
//! ```
//!
//! `std_err` is present only for ensemble snapshots; the Bloch columns only
//! for qubit models (d = 2). The JSON snapshot file carries the same
//! records plus the lattice axes, so it re-ingests into an equivalent
//! resolved state.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use qfr_core::linalg::pauli;
use qfr_core::quantum::WeightedState;
use qfr_core::resolved::ResolvedState;
use qfr_core::signal::{AxisSpec, SignalLattice};
use qfr_core::trajectory::Trajectory;
use qfr_core::CMatrixF64;

/// 17 significant digits; enough to reproduce any f64 exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// One snapshot row.
#[derive(Debug, Clone)]
pub struct SnapshotRecord {
    pub step: u64,
    pub index: usize,
    pub y: Vec<f64>,
    pub trace: f64,
    pub std_err: Option<f64>,
    pub bloch: Option<[f64; 3]>,
}

/// Conditional Bloch vector of a qubit entry.
pub fn bloch_vector(w: &WeightedState<f64>) -> Option<[f64; 3]> {
    if w.dim() != 2 {
        return None;
    }
    let trace = w.weight();
    if trace <= 0.0 {
        return Some([0.0, 0.0, 0.0]);
    }
    let m = w.matrix();
    Some([
        pauli::x::<f64>().matmul(m).trace_re() / trace,
        pauli::y::<f64>().matmul(m).trace_re() / trace,
        pauli::z::<f64>().matmul(m).trace_re() / trace,
    ])
}

/// Extracts the snapshot rows of a resolved state (ascending index).
pub fn snapshot_records(state: &ResolvedState<f64>) -> Vec<SnapshotRecord> {
    state
        .entries()
        .map(|(index, w)| SnapshotRecord {
            step: state.step(),
            index,
            y: state.lattice().point(index).components().to_vec(),
            trace: w.weight(),
            std_err: None,
            bloch: bloch_vector(w),
        })
        .collect()
}

/// Snapshot metadata shared by the CSV and JSON writers.
#[derive(Debug, Clone)]
pub struct SnapshotMeta {
    /// `deterministic` or `ensemble`.
    pub kind: &'static str,
    pub hilbert_dim: usize,
    pub lattice_axes: Vec<AxisSpec<f64>>,
    pub leaked_mass: f64,
    pub clip_count: u64,
    pub n_traj: Option<u64>,
}

impl SnapshotMeta {
    pub fn for_state(kind: &'static str, state: &ResolvedState<f64>, dim: usize) -> Self {
        let axes = (0..state.lattice().dim())
            .map(|k| state.lattice().axis_spec(k))
            .collect();
        Self {
            kind,
            hilbert_dim: dim,
            lattice_axes: axes,
            leaked_mass: state.leaked_mass(),
            clip_count: state.clip_count(),
            n_traj: None,
        }
    }
}

pub fn write_snapshots_csv(
    path: &Path,
    meta: &SnapshotMeta,
    records: &[SnapshotRecord],
) -> std::io::Result<()> {
    let signal_dim = meta.lattice_axes.len();
    let mut text = String::new();
    let _ = writeln!(
        text,
        "# qfr snapshots v1 kind={} d={} D={}",
        meta.kind, meta.hilbert_dim, signal_dim
    );
    let mut header = String::from("step,index");
    for k in 0..signal_dim {
        let _ = write!(header, ",y{k}");
    }
    header.push_str(",trace");
    let with_err = meta.kind == "ensemble";
    if with_err {
        header.push_str(",std_err");
    }
    let with_bloch = meta.hilbert_dim == 2;
    if with_bloch {
        header.push_str(",bloch_x,bloch_y,bloch_z");
    }
    let _ = writeln!(text, "{header}");
    for r in records {
        let _ = write!(text, "{},{}", r.step, r.index);
        for v in &r.y {
            let _ = write!(text, ",{}", fmt17(*v));
        }
        let _ = write!(text, ",{}", fmt17(r.trace));
        if with_err {
            let _ = write!(text, ",{}", fmt17(r.std_err.unwrap_or(0.0)));
        }
        if with_bloch {
            let b = r.bloch.unwrap_or([0.0; 3]);
            let _ = write!(text, ",{},{},{}", fmt17(b[0]), fmt17(b[1]), fmt17(b[2]));
        }
        text.push('\n');
    }
    std::fs::write(path, text)
}

pub fn write_snapshots_json(
    path: &Path,
    meta: &SnapshotMeta,
    records: &[SnapshotRecord],
) -> std::io::Result<()> {
    let mut text = String::new();
    text.push_str("{\n");
    let _ = writeln!(text, "  \"schema\": \"qfr.snapshots.v1\",");
    let _ = writeln!(text, "  \"kind\": \"{}\",", meta.kind);
    let _ = writeln!(text, "  \"hilbert_dim\": {},", meta.hilbert_dim);
    let _ = writeln!(text, "  \"signal_dim\": {},", meta.lattice_axes.len());
    if let Some(n) = meta.n_traj {
        let _ = writeln!(text, "  \"n_traj\": {n},");
    }
    let _ = writeln!(text, "  \"leaked_mass\": {},", fmt17(meta.leaked_mass));
    let _ = writeln!(text, "  \"clip_count\": {},", meta.clip_count);
    text.push_str("  \"lattice\": [");
    for (k, axis) in meta.lattice_axes.iter().enumerate() {
        if k > 0 {
            text.push_str(", ");
        }
        let _ = write!(
            text,
            "{{\"min\": {}, \"max\": {}, \"step\": {}}}",
            fmt17(axis.min),
            fmt17(axis.max),
            fmt17(axis.step)
        );
    }
    text.push_str("],\n");
    text.push_str("  \"records\": [\n");
    for (i, r) in records.iter().enumerate() {
        let _ = write!(
            text,
            "    {{\"step\": {}, \"index\": {}, \"y\": [",
            r.step, r.index
        );
        for (k, v) in r.y.iter().enumerate() {
            if k > 0 {
                text.push_str(", ");
            }
            text.push_str(&fmt17(*v));
        }
        let _ = write!(text, "], \"trace\": {}", fmt17(r.trace));
        if let Some(e) = r.std_err {
            let _ = write!(text, ", \"std_err\": {}", fmt17(e));
        }
        if let Some(b) = r.bloch {
            let _ = write!(
                text,
                ", \"bloch\": [{}, {}, {}]",
                fmt17(b[0]),
                fmt17(b[1]),
                fmt17(b[2])
            );
        }
        text.push('}');
        if i + 1 < records.len() {
            text.push(',');
        }
        text.push('\n');
    }
    text.push_str("  ]\n}\n");
    std::fs::write(path, text)
}

/// Re-ingests a JSON snapshot file: one resolved state per recorded step.
///
/// Qubit entries are rebuilt exactly from trace and Bloch vector; for other
/// dimensions the entry is a scaled identity carrying the right trace,
/// which is all the snapshot schema stores.
pub fn read_snapshots_json(path: &Path) -> Result<BTreeMap<u64, ResolvedState<f64>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let obj = value.as_object().ok_or("top level must be an object")?;
    if obj.get("schema").and_then(|s| s.as_str()) != Some("qfr.snapshots.v1") {
        return Err("unknown snapshot schema".into());
    }
    let dim = obj
        .get("hilbert_dim")
        .and_then(|v| v.as_u64())
        .ok_or("missing hilbert_dim")? as usize;
    let axes: Vec<AxisSpec<f64>> = obj
        .get("lattice")
        .and_then(|v| v.as_array())
        .ok_or("missing lattice")?
        .iter()
        .map(|axis| {
            let get = |key: &str| {
                axis.get(key)
                    .and_then(|v| v.as_f64())
                    .ok_or_else(|| format!("lattice axis missing `{key}`"))
            };
            Ok(AxisSpec {
                min: get("min")?,
                max: get("max")?,
                step: get("step")?,
            })
        })
        .collect::<Result<_, String>>()?;
    let lattice = SignalLattice::new(axes).map_err(|e| e.to_string())?;
    let leaked = obj
        .get("leaked_mass")
        .and_then(|v| v.as_f64())
        .unwrap_or(0.0);
    let clip_count = obj.get("clip_count").and_then(|v| v.as_u64()).unwrap_or(0);

    let mut per_step: BTreeMap<u64, BTreeMap<usize, WeightedState<f64>>> = BTreeMap::new();
    for record in obj
        .get("records")
        .and_then(|v| v.as_array())
        .ok_or("missing records")?
    {
        let step = record
            .get("step")
            .and_then(|v| v.as_u64())
            .ok_or("record missing step")?;
        let index = record
            .get("index")
            .and_then(|v| v.as_u64())
            .ok_or("record missing index")? as usize;
        let trace = record
            .get("trace")
            .and_then(|v| v.as_f64())
            .ok_or("record missing trace")?;
        let matrix = match record.get("bloch").and_then(|v| v.as_array()) {
            Some(b) if dim == 2 => {
                let comp: Vec<f64> = b.iter().filter_map(|v| v.as_f64()).collect();
                if comp.len() != 3 {
                    return Err("bloch vector must have three components".into());
                }
                // ρ = trace · (1 + b·σ) / 2.
                let mut m = CMatrixF64::identity(2);
                m += &pauli::x::<f64>().scaled_re(comp[0]);
                m += &pauli::y::<f64>().scaled_re(comp[1]);
                m += &pauli::z::<f64>().scaled_re(comp[2]);
                m.scaled_re(0.5 * trace)
            }
            _ => CMatrixF64::identity(dim).scaled_re(trace / dim as f64),
        };
        per_step.entry(step).or_default().insert(
            index,
            WeightedState::new(matrix, &Default::default()).map_err(|e| e.to_string())?,
        );
    }

    let last_step = per_step.keys().last().copied();
    Ok(per_step
        .into_iter()
        .map(|(step, entries)| {
            // Leaked mass and clip count are cumulative; attribute them to
            // the final step, earlier steps get zero.
            let (lm, cc) = if Some(step) == last_step {
                (leaked, clip_count)
            } else {
                (0.0, 0)
            };
            (
                step,
                ResolvedState::from_parts(lattice.clone(), entries, step, lm, cc),
            )
        })
        .collect())
}

/// Trajectory dump CSV:
/// `trajectory,step,outcome,y*,rho_diag*[,rho_01_re,rho_01_im]`.
pub fn write_trajectories_csv(
    path: &Path,
    trajectories: &[Trajectory<f64>],
) -> std::io::Result<()> {
    let mut text = String::new();
    let (signal_dim, dim) = trajectories
        .first()
        .and_then(|t| t.records.first())
        .map(|r| (r.signal.dim(), r.state.dim()))
        .unwrap_or((1, 2));
    let _ = writeln!(text, "# qfr trajectories v1 d={dim} D={signal_dim}");
    let mut header = String::from("trajectory,step,outcome");
    for k in 0..signal_dim {
        let _ = write!(header, ",y{k}");
    }
    for i in 0..dim {
        let _ = write!(header, ",rho_{i}{i}");
    }
    if dim == 2 {
        header.push_str(",rho_01_re,rho_01_im");
    }
    let _ = writeln!(text, "{header}");
    for (t, traj) in trajectories.iter().enumerate() {
        for r in &traj.records {
            let _ = write!(text, "{t},{},{}", r.step, r.outcome);
            for v in r.signal.components() {
                let _ = write!(text, ",{}", fmt17(*v));
            }
            for i in 0..dim {
                let _ = write!(text, ",{}", fmt17(r.state.matrix().get(i, i).re));
            }
            if dim == 2 {
                let c = r.state.matrix().get(0, 1);
                let _ = write!(text, ",{},{}", fmt17(c.re), fmt17(c.im));
            }
            text.push('\n');
        }
    }
    std::fs::write(path, text)
}

/// Minimal JSON object writer with deterministic key order.
pub struct JsonObject {
    fields: Vec<(String, String)>,
}

impl JsonObject {
    pub fn new() -> Self {
        Self { fields: Vec::new() }
    }

    pub fn str(mut self, key: &str, value: &str) -> Self {
        self.fields.push((
            key.into(),
            format!("\"{}\"", value.replace('\\', "\\\\").replace('"', "\\\"")),
        ));
        self
    }

    pub fn int(mut self, key: &str, value: impl Into<i128>) -> Self {
        self.fields.push((key.into(), value.into().to_string()));
        self
    }

    pub fn float(mut self, key: &str, value: f64) -> Self {
        self.fields.push((key.into(), fmt17(value)));
        self
    }

    pub fn bool(mut self, key: &str, value: bool) -> Self {
        self.fields.push((key.into(), value.to_string()));
        self
    }

    pub fn raw(mut self, key: &str, value: String) -> Self {
        self.fields.push((key.into(), value));
        self
    }

    pub fn float_array(mut self, key: &str, values: &[f64]) -> Self {
        let inner: Vec<String> = values.iter().map(|v| fmt17(*v)).collect();
        self.fields
            .push((key.into(), format!("[{}]", inner.join(", "))));
        self
    }

    pub fn render(&self) -> String {
        let mut text = String::from("{\n");
        for (i, (key, value)) in self.fields.iter().enumerate() {
            let _ = write!(text, "  \"{key}\": {value}");
            if i + 1 < self.fields.len() {
                text.push(',');
            }
            text.push('\n');
        }
        text.push_str("}\n");
        text
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.render())
    }
}

impl Default for JsonObject {
    fn default() -> Self {
        Self::new()
    }
}
