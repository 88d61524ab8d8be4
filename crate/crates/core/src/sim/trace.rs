//! Per-step trace and its CSV form.
//!
//! Row `k` holds the state at the start of step `k` (`x1_psi`, `x2_psi`,
//! `y_c`), the inputs and control used during the step, and the algebraic
//! outputs of that step's hydraulic solve. Tank pressures therefore obey
//! `x(k+1) = x(k) + C·dt·tank_inflow(k)` between consecutive rows. Floats are
//! written in shortest round-trip form, so reading a trace back is exact.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ControllerKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub t_min: f64,
    pub demand_gpm: f64,
    pub phi_kg_per_kwh: f64,
    pub x1_psi: f64,
    pub x2_psi: f64,
    pub y_c_mg_per_gal: f64,
    /// Controller output before the low-pass filter.
    pub target_booster_psi: f64,
    pub target_inlet1_gpm: f64,
    pub target_inlet2_gpm: f64,
    pub target_valve1: f64,
    pub target_valve2: f64,
    /// Control applied to the plant.
    pub booster_psi: f64,
    pub inlet1_gpm: f64,
    pub inlet2_gpm: f64,
    pub valve1: f64,
    pub valve2: f64,
    pub y_d_psi: f64,
    pub y_d_error_psi: f64,
    pub boost_psi: f64,
    pub power_kw: f64,
    pub y_e_kg_per_h: f64,
    pub tank1_inflow_gpm: f64,
    pub tank2_inflow_gpm: f64,
    pub source_flow_gpm: f64,
    pub treatment_flow_gpm: f64,
    pub continuity_residual: f64,
    /// MPC only: whether the selected point met every bound over the horizon.
    pub mpc_feasible: bool,
    pub mpc_violation_psi: f64,
    /// A tank or monitored pipe pressure is outside its bounds this step.
    pub bound_violation: bool,
    pub chlorine_clamped: bool,
}

pub const TRACE_COLUMNS: [&str; 31] = [
    "step",
    "t_min",
    "demand_gpm",
    "phi_kg_per_kwh",
    "x1_psi",
    "x2_psi",
    "y_c_mg_per_gal",
    "target_booster_psi",
    "target_inlet1_gpm",
    "target_inlet2_gpm",
    "target_valve1",
    "target_valve2",
    "booster_psi",
    "inlet1_gpm",
    "inlet2_gpm",
    "valve1",
    "valve2",
    "y_d_psi",
    "y_d_error_psi",
    "boost_psi",
    "power_kw",
    "y_e_kg_per_h",
    "tank1_inflow_gpm",
    "tank2_inflow_gpm",
    "source_flow_gpm",
    "treatment_flow_gpm",
    "continuity_residual",
    "mpc_feasible",
    "mpc_violation_psi",
    "bound_violation",
    "chlorine_clamped",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub controller: ControllerKind,
    pub dt_min: f64,
    pub records: Vec<TraceRecord>,
}

impl SimulationTrace {
    pub fn duration_min(&self) -> f64 {
        self.records.len() as f64 * self.dt_min
    }

    pub fn column(&self, f: impl Fn(&TraceRecord) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }
}

pub fn write_trace<W: Write>(out: W, trace: &SimulationTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if trace.records.is_empty() {
        w.write_record(TRACE_COLUMNS)
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    for r in &trace.records {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

/// Reads a trace written by [`write_trace`]. The controller kind and step
/// length are not stored in the file and must be supplied; the step length
/// is recovered from the time column when there are at least two rows.
pub fn read_trace<R: Read>(input: R, controller: ControllerKind) -> Result<SimulationTrace> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    if headers.iter().ne(TRACE_COLUMNS) {
        return Err(Error::Parse {
            line: 1,
            msg: "header does not match the trace column layout".into(),
        });
    }
    let mut records = Vec::new();
    for row in reader.deserialize::<TraceRecord>() {
        records.push(row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?);
    }
    let dt_min = match records.as_slice() {
        [a, b, ..] => b.t_min - a.t_min,
        _ => 0.0,
    };
    Ok(SimulationTrace {
        controller,
        dt_min,
        records,
    })
}

pub fn read_trace_file(path: &Path, controller: ControllerKind) -> Result<SimulationTrace> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace(f, controller)
}
