use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::trace::{SimulationTrace, TraceRecord};

/// Summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub controller: String,
    pub steps: usize,
    pub dt_min: f64,
    pub duration_h: f64,
    /// Leading hours left out of everything below.
    pub warmup_excluded_h: f64,
    pub total_emissions_kg: f64,
    pub total_energy_kwh: f64,
    pub peak_emissions_kg_h: f64,
    pub y_d_rms_error_psi: f64,
    pub y_d_min_psi: f64,
    pub y_d_max_psi: f64,
    pub tank1_min_psi: f64,
    pub tank1_max_psi: f64,
    pub tank2_min_psi: f64,
    pub tank2_max_psi: f64,
    pub y_c_min_mg_per_gal: f64,
    pub y_c_final_mg_per_gal: f64,
    pub violation_steps: usize,
    pub infeasible_steps: usize,
    pub chlorine_clamped_steps: usize,
    pub peak_treatment_flow_gpm: f64,
    pub max_continuity_residual: f64,
}

fn min_max(rows: &[TraceRecord], f: impl Fn(&TraceRecord) -> f64) -> (f64, f64) {
    rows.iter()
        .map(f)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Metrics over `trace`, skipping the first `warmup_steps` rows.
pub fn metrics(trace: &SimulationTrace, warmup_steps: usize) -> Result<Metrics> {
    let rows = trace.records.get(warmup_steps..).unwrap_or_default();
    if rows.is_empty() {
        return Err(Error::Range(format!(
            "no trace rows left after skipping {warmup_steps} warm-up steps"
        )));
    }
    let dt_h = trace.dt_min / 60.0;
    let n = rows.len() as f64;
    let (y_d_min, y_d_max) = min_max(rows, |r| r.y_d_psi);
    let (t1_min, t1_max) = min_max(rows, |r| r.x1_psi);
    let (t2_min, t2_max) = min_max(rows, |r| r.x2_psi);
    let (y_c_min, _) = min_max(rows, |r| r.y_c_mg_per_gal);
    Ok(Metrics {
        controller: trace.controller.name().to_string(),
        steps: rows.len(),
        dt_min: trace.dt_min,
        duration_h: n * dt_h,
        warmup_excluded_h: warmup_steps as f64 * dt_h,
        total_emissions_kg: rows.iter().map(|r| r.y_e_kg_per_h * dt_h).sum(),
        total_energy_kwh: rows.iter().map(|r| r.power_kw * dt_h).sum(),
        peak_emissions_kg_h: rows.iter().map(|r| r.y_e_kg_per_h).fold(0.0, f64::max),
        y_d_rms_error_psi: (rows.iter().map(|r| r.y_d_error_psi.powi(2)).sum::<f64>() / n).sqrt(),
        y_d_min_psi: y_d_min,
        y_d_max_psi: y_d_max,
        tank1_min_psi: t1_min,
        tank1_max_psi: t1_max,
        tank2_min_psi: t2_min,
        tank2_max_psi: t2_max,
        y_c_min_mg_per_gal: y_c_min,
        y_c_final_mg_per_gal: rows.last().expect("non-empty").y_c_mg_per_gal,
        violation_steps: rows.iter().filter(|r| r.bound_violation).count(),
        infeasible_steps: rows.iter().filter(|r| !r.mpc_feasible).count(),
        chlorine_clamped_steps: rows.iter().filter(|r| r.chlorine_clamped).count(),
        peak_treatment_flow_gpm: rows.iter().map(|r| r.treatment_flow_gpm).fold(f64::NEG_INFINITY, f64::max),
        max_continuity_residual: rows.iter().map(|r| r.continuity_residual).fold(0.0, f64::max),
    })
}

/// Largest `|x(k+1) − x(k) − C·dt·inflow(k)|` over consecutive rows, PSI.
pub fn tank_balance_residual(trace: &SimulationTrace, capacitances: [f64; 2]) -> f64 {
    let dt = trace.dt_min;
    trace
        .records
        .windows(2)
        .flat_map(|w| {
            let (a, b) = (&w[0], &w[1]);
            [
                (b.x1_psi - a.x1_psi - capacitances[0] * dt * a.tank1_inflow_gpm).abs(),
                (b.x2_psi - a.x2_psi - capacitances[1] * dt * a.tank2_inflow_gpm).abs(),
            ]
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub baseline: f64,
    pub candidate: f64,
    /// `baseline − candidate`; positive means the candidate is lower.
    pub delta: f64,
    /// `delta / baseline · 100`, absent when the baseline is zero.
    pub percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub candidate: String,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn row(&self, metric: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    /// Emission reduction of the candidate relative to the baseline, %.
    pub fn emissions_savings_percent(&self) -> Option<f64> {
        self.row("total_emissions_kg").and_then(|r| r.percent)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<26} {:>14} {:>14} {:>14} {:>9}",
            "metric", self.baseline, self.candidate, "delta", "%"
        );
        for r in &self.rows {
            let pct = r.percent.map_or_else(|| "-".to_string(), |p| format!("{p:.2}"));
            let _ = writeln!(
                s,
                "{:<26} {:>14.4} {:>14.4} {:>14.4} {:>9}",
                r.metric, r.baseline, r.candidate, r.delta, pct
            );
        }
        s
    }
}

/// Side-by-side metrics. Both runs must cover the same steps.
pub fn compare(baseline: &Metrics, candidate: &Metrics) -> Result<Comparison> {
    if baseline.steps != candidate.steps || baseline.dt_min != candidate.dt_min {
        return Err(Error::Compare(format!(
            "runs differ in length: {} steps of {} min vs {} steps of {} min",
            baseline.steps, baseline.dt_min, candidate.steps, candidate.dt_min
        )));
    }
    let pairs = [
        ("total_emissions_kg", baseline.total_emissions_kg, candidate.total_emissions_kg),
        ("total_energy_kwh", baseline.total_energy_kwh, candidate.total_energy_kwh),
        ("peak_emissions_kg_h", baseline.peak_emissions_kg_h, candidate.peak_emissions_kg_h),
        ("y_d_rms_error_psi", baseline.y_d_rms_error_psi, candidate.y_d_rms_error_psi),
        ("y_d_min_psi", baseline.y_d_min_psi, candidate.y_d_min_psi),
        ("y_d_max_psi", baseline.y_d_max_psi, candidate.y_d_max_psi),
        ("tank1_min_psi", baseline.tank1_min_psi, candidate.tank1_min_psi),
        ("tank1_max_psi", baseline.tank1_max_psi, candidate.tank1_max_psi),
        ("tank2_min_psi", baseline.tank2_min_psi, candidate.tank2_min_psi),
        ("tank2_max_psi", baseline.tank2_max_psi, candidate.tank2_max_psi),
        ("y_c_min_mg_per_gal", baseline.y_c_min_mg_per_gal, candidate.y_c_min_mg_per_gal),
        ("violation_steps", baseline.violation_steps as f64, candidate.violation_steps as f64),
        ("peak_treatment_flow_gpm", baseline.peak_treatment_flow_gpm, candidate.peak_treatment_flow_gpm),
    ];
    Ok(Comparison {
        baseline: baseline.controller.clone(),
        candidate: candidate.controller.clone(),
        rows: pairs
            .into_iter()
            .map(|(metric, b, c)| ComparisonRow {
                metric: metric.to_string(),
                baseline: b,
                candidate: c,
                delta: b - c,
                percent: (b != 0.0).then(|| (b - c) / b * 100.0),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ControllerKind;

    fn flat(y_e: f64, steps: usize) -> SimulationTrace {
        let rec = |k: usize| TraceRecord {
            step: k,
            t_min: k as f64 * 2.5,
            demand_gpm: 3000.0,
            phi_kg_per_kwh: 0.4,
            x1_psi: 86.0,
            x2_psi: 86.0,
            y_c_mg_per_gal: 20.0,
            target_booster_psi: 20.0,
            target_inlet1_gpm: 0.0,
            target_inlet2_gpm: 0.0,
            target_valve1: 0.0,
            target_valve2: 0.0,
            booster_psi: 20.0,
            inlet1_gpm: 0.0,
            inlet2_gpm: 0.0,
            valve1: 0.0,
            valve2: 0.0,
            y_d_psi: 80.0 + if k.is_multiple_of(2) { 1.0 } else { -1.0 },
            y_d_error_psi: if k.is_multiple_of(2) { -1.0 } else { 1.0 },
            boost_psi: 81.0,
            power_kw: y_e / 0.4,
            y_e_kg_per_h: y_e,
            tank1_inflow_gpm: 0.0,
            tank2_inflow_gpm: 0.0,
            source_flow_gpm: 3000.0,
            treatment_flow_gpm: 3000.0,
            continuity_residual: 0.0,
            mpc_feasible: true,
            mpc_violation_psi: 0.0,
            bound_violation: false,
            chlorine_clamped: false,
        };
        SimulationTrace {
            controller: ControllerKind::Mpc,
            dt_min: 2.5,
            records: (0..steps).map(rec).collect(),
        }
    }

    #[test]
    fn totals_and_rms() {
        let m = metrics(&flat(48.0, 48), 0).unwrap();
        // 48 steps of 2.5 min = 2 h at 48 kg/h
        assert!((m.total_emissions_kg - 96.0).abs() < 1e-9);
        assert!((m.y_d_rms_error_psi - 1.0).abs() < 1e-12);
        assert_eq!(m.duration_h, 2.0);
    }

    #[test]
    fn warmup_is_skipped() {
        let m = metrics(&flat(48.0, 48), 24).unwrap();
        assert_eq!(m.steps, 24);
        assert!((m.total_emissions_kg - 48.0).abs() < 1e-9);
        assert!(metrics(&flat(1.0, 4), 4).is_err());
    }

    #[test]
    fn comparison_sign_and_percent() {
        let b = metrics(&flat(50.0, 48), 0).unwrap();
        let c = metrics(&flat(45.0, 48), 0).unwrap();
        let cmp = compare(&b, &c).unwrap();
        let row = cmp.row("total_emissions_kg").unwrap();
        assert!((row.delta - 10.0).abs() < 1e-9);
        assert!((cmp.emissions_savings_percent().unwrap() - 10.0).abs() < 1e-9);
        assert!(cmp.to_table().contains("total_emissions_kg"));
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let b = metrics(&flat(50.0, 48), 0).unwrap();
        let c = metrics(&flat(50.0, 40), 0).unwrap();
        assert_eq!(compare(&b, &c).unwrap_err().code(), "E_COMPARE");
    }
}
