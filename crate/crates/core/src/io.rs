//! Deterministic CSV/JSON emission.
//!
//! Floats are written with Rust's shortest round-trip formatting, so files
//! are byte-identical across reruns and worker counts. Timestamps never
//! appear in data files; they belong in the run metadata sidecar.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::lax_oleinik::{EvolutionTrace, OrbitSample};
use crate::regularity::SeriesRow;

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Trace export: one row per (step, node) with the snapshot value.
pub fn write_trace_csv(path: &Path, trace: &EvolutionTrace) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "step,node_index,value")?;
    for (step, snap) in trace.snapshots.iter().enumerate() {
        for (node, value) in snap.values.iter().enumerate() {
            writeln!(w, "{step},{node},{value}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// JSON sidecar of a trace export.
#[derive(Debug, Clone, Serialize)]
pub struct TraceSidecar {
    pub tau: f64,
    pub n_per_dim: usize,
    pub dim: usize,
    pub r_cut: f64,
    pub preset: crate::hamiltonian::Preset,
    pub potential: crate::hamiltonian::PotentialKind,
    pub v_max: f64,
    pub steps: usize,
}

impl TraceSidecar {
    pub fn of(trace: &EvolutionTrace) -> Self {
        TraceSidecar {
            tau: trace.tau,
            n_per_dim: trace.grid().n_per_dim(),
            dim: trace.grid().dim(),
            r_cut: trace.hr.r_cut,
            preset: trace.hr.base.preset,
            potential: trace.hr.base.potential,
            v_max: trace.v_max,
            steps: trace.steps(),
        }
    }
}

/// Orbit export: one row per segment with position, velocity, momentum and
/// energy; the final row carries the terminal position only.
pub fn write_orbit_csv(path: &Path, orbit: &OrbitSample) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let dim = orbit.dim;
    let axis_cols = |name: &str| -> String {
        (0..dim)
            .map(|d| format!("{name}{d}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    writeln!(
        w,
        "k,{},{},{},energy",
        axis_cols("position"),
        axis_cols("velocity"),
        axis_cols("momentum")
    )?;
    for k in 0..orbit.velocities.len() {
        let pos = coords(&orbit.positions[k], dim);
        let vel = coords(&orbit.velocities[k], dim);
        let mom = coords(&orbit.momenta[k], dim);
        writeln!(w, "{k},{pos},{vel},{mom},{}", orbit.energies[k])?;
    }
    // terminal node: no outgoing segment
    let k = orbit.velocities.len();
    let pos = coords(&orbit.positions[k], dim);
    let blanks = ",".repeat(2 * dim + 1);
    writeln!(w, "{k},{pos}{blanks}")?;
    w.flush()?;
    Ok(())
}

fn coords(c: &[f64; crate::grid::MAX_DIM], dim: usize) -> String {
    c[..dim]
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Per-(datum, cutoff) Lipschitz/semiconcavity series table.
pub fn write_lip_series_csv(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "datum_id,R,t,lip,K")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.datum, r.r_cut, r.t, r.lip, r.semiconcavity)?;
    }
    w.flush()?;
    Ok(())
}
