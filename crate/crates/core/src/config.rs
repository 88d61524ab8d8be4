//! Scenario configuration file.
//!
//! A TOML document with the sections `[plant]`, `[quality]`, `[demand]`,
//! `[emissions]`, `[controller]`, `[controller.mpc]`,
//! `[controller.reactive]` and `[simulation]`. Every key has a default;
//! unknown keys are rejected. Keys whose value is derived from other keys
//! (pipe resistance, tank capacitances, emission normalisation, booster
//! bias) may be left out and are filled in by [`Config::resolve_plant`] and when the scenario is built.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::hazen_williams_resistance;
use crate::quality::ChlorineMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantSection {
    pub source_pressure_psi: f64,
    /// Treatment block (flocculation + cartridge filter) resistance, PSI/GPM.
    pub treatment_resistance: f64,
    /// Distribution pipe resistance, PSI/GPM. Derived from the pipe
    /// geometry below when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution_resistance: Option<f64>,
    pub pipe_diameter_in: f64,
    pub pipe_length_ft: f64,
    pub pipe_roughness: f64,
    pub pipe_operating_flow_gpm: f64,
    /// Time for a tank draining through its fully open valve to lose 63%.
    pub tank_time_constant_h: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tank1_capacitance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tank2_capacitance: Option<f64>,
    pub booster_min_psi: f64,
    pub booster_max_psi: f64,
    pub inlet1_max_gpm: f64,
    pub inlet2_max_gpm: f64,
    pub valve1_max: f64,
    pub valve2_max: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self {
            source_pressure_psi: 60.0,
            treatment_resistance: 0.006,
            distribution_resistance: None,
            pipe_diameter_in: 12.0,
            pipe_length_ft: 100.0,
            pipe_roughness: 130.0,
            pipe_operating_flow_gpm: 3500.0,
            tank_time_constant_h: 4.0,
            tank1_capacitance: None,
            tank2_capacitance: None,
            booster_min_psi: 20.0,
            booster_max_psi: 24.0,
            inlet1_max_gpm: 2000.0,
            inlet2_max_gpm: 2000.0,
            valve1_max: 60.0,
            valve2_max: 120.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QualitySection {
    pub decay_per_day: f64,
    pub mode: ChlorineMode,
    /// Concentration leaving treatment, mg/gal.
    pub dose_mg_per_gal: f64,
    /// Minimum acceptable residual before distribution, mg/gal.
    pub minimum_mg_per_gal: f64,
    pub detention_min: f64,
}

impl Default for QualitySection {
    fn default() -> Self {
        Self {
            decay_per_day: 0.5,
            mode: ChlorineMode::WellMixed,
            dose_mg_per_gal: 22.0,
            minimum_mg_per_gal: 6.0,
            detention_min: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemandSection {
    pub mean_gpm: f64,
    pub amplitude: f64,
    pub peak_hour: f64,
    pub noise_amplitude: f64,
    pub noise_interval_min: f64,
    /// `minute,gpm` table replacing the cyclic profile.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_path: Option<PathBuf>,
}

impl Default for DemandSection {
    fn default() -> Self {
        Self {
            mean_gpm: 5_000_000.0 / 1440.0,
            amplitude: 0.3,
            peak_hour: 18.0,
            noise_amplitude: 0.02,
            noise_interval_min: 60.0,
            table_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionsSource {
    /// Seeded synthetic grid; coefficients fitted from it.
    Synthetic,
    /// Mix CSV; coefficients fitted from it.
    Csv,
    /// Flat intensity.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmissionsSection {
    pub source: EmissionsSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mix_path: Option<PathBuf>,
    /// kg CO2 per kWh, used by the constant source.
    pub constant_phi: f64,
    /// Relative noise on synthetic GHG observations.
    pub ghg_noise: f64,
}

impl Default for EmissionsSection {
    fn default() -> Self {
        Self {
            source: EmissionsSource::Synthetic,
            mix_path: None,
            constant_phi: 0.4,
            ghg_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Mpc,
    Reactive,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Mpc => "mpc",
            ControllerKind::Reactive => "reactive",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mpc" => Ok(ControllerKind::Mpc),
            "reactive" => Ok(ControllerKind::Reactive),
            other => Err(Error::config(
                "controller.kind",
                format!("unknown controller `{other}` (expected mpc or reactive)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcSection {
    pub y_d_setpoint_psi: f64,
    pub y_c_setpoint_mg_per_gal: f64,
    pub horizon_steps: usize,
    /// Mesh points for booster, inlet 1, inlet 2, valve 1, valve 2.
    pub resolution: [usize; 5],
    pub alpha: f64,
    pub tank_min_psi: f64,
    pub tank_max_psi: f64,
    pub pipe_min_psi: f64,
    pub pipe_max_psi: f64,
    /// Each weight is `priority / scale²`, so an output deviating by its
    /// scale costs `priority`.
    pub priority_pressure: f64,
    pub priority_chlorine: f64,
    pub priority_emissions: f64,
    pub scale_pressure_psi: f64,
    pub scale_chlorine_mg_per_gal: f64,
    /// Peak-hour intensity times mean pumping power when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_emissions_kg_h: Option<f64>,
}

impl Default for MpcSection {
    fn default() -> Self {
        Self {
            y_d_setpoint_psi: 80.0,
            y_c_setpoint_mg_per_gal: 22.0,
            horizon_steps: 2,
            resolution: [5; 5],
            alpha: 0.3,
            tank_min_psi: 77.0,
            tank_max_psi: 95.0,
            pipe_min_psi: 77.0,
            pipe_max_psi: 95.0,
            priority_pressure: 4.0,
            priority_chlorine: 3.0,
            priority_emissions: 1.0,
            scale_pressure_psi: 5.0,
            scale_chlorine_mg_per_gal: 2.0,
            scale_emissions_kg_h: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReactiveSection {
    pub tank1_low_psi: f64,
    pub tank1_high_psi: f64,
    pub tank2_low_psi: f64,
    pub tank2_high_psi: f64,
    pub fill1_gpm: f64,
    pub fill2_gpm: f64,
    /// Valve conductance while draining; the valve maximum when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valve1_open: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valve2_open: Option<f64>,
    pub kp: f64,
    pub ki: f64,
    /// Booster pressure at zero error; nominal operating point when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub booster_bias_psi: Option<f64>,
    pub initially_filling: bool,
}

impl Default for ReactiveSection {
    fn default() -> Self {
        Self {
            tank1_low_psi: 78.0,
            tank1_high_psi: 94.0,
            tank2_low_psi: 84.0,
            tank2_high_psi: 94.0,
            fill1_gpm: 1500.0,
            fill2_gpm: 1500.0,
            valve1_open: None,
            valve2_open: None,
            kp: 0.5,
            ki: 0.05,
            booster_bias_psi: None,
            initially_filling: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    pub kind: ControllerKind,
    pub mpc: MpcSection,
    pub reactive: ReactiveSection,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            kind: ControllerKind::Mpc,
            mpc: MpcSection::default(),
            reactive: ReactiveSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub dt_min: f64,
    pub duration_h: f64,
    pub seed: u64,
    pub initial_tank1_psi: f64,
    pub initial_tank2_psi: f64,
    pub initial_chlorine_mg_per_gal: f64,
    /// Leave the first `warmup_h` hours out of the metrics.
    pub exclude_warmup: bool,
    pub warmup_h: f64,
    pub trace_file: String,
    pub metrics_file: String,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            dt_min: 2.5,
            duration_h: 120.0,
            seed: 42,
            initial_tank1_psi: 86.0,
            initial_tank2_psi: 86.0,
            initial_chlorine_mg_per_gal: 22.0,
            exclude_warmup: false,
            warmup_h: 12.0,
            trace_file: "trace.csv".into(),
            metrics_file: "metrics.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub plant: PlantSection,
    pub quality: QualitySection,
    pub demand: DemandSection,
    pub emissions: EmissionsSection,
    pub controller: ControllerSection,
    pub simulation: SimulationSection,
}

/// Parsed configuration and the keys that fell back to their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: Config,
    pub defaulted: Vec<String>,
    /// Directory relative paths in the file are resolved against.
    pub base_dir: PathBuf,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<(Self, Vec<String>)> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.to_string().trim()))?;
        let config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::config(key, e.inner().to_string().lines().last().unwrap_or_default().trim())
        })?;
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<document>", e.to_string()))?;
        let defaults = toml::Table::try_from(Config::default()).expect("defaults serialise");
        let mut defaulted = Vec::new();
        missing_keys(&defaults, &user, "", &mut defaulted);
        Ok((config, defaulted))
    }

    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (config, defaulted) = Self::from_toml_str(&text)?;
        for key in &defaulted {
            log::info!("config {}: `{key}` not set, using default", path.display());
        }
        Ok(LoadedConfig {
            config,
            defaulted,
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// Fills in the derived plant values that depend only on the plant
    /// section. Values already present are kept.
    pub fn resolve_plant(&mut self) {
        let p = &mut self.plant;
        if p.distribution_resistance.is_none() {
            p.distribution_resistance = Some(hazen_williams_resistance(
                p.pipe_diameter_in,
                p.pipe_length_ft,
                p.pipe_roughness,
                p.pipe_operating_flow_gpm,
            ));
        }
        let tau_min = p.tank_time_constant_h * 60.0;
        if p.tank1_capacitance.is_none() {
            p.tank1_capacitance = Some(1.0 / (tau_min * p.valve1_max));
        }
        if p.tank2_capacitance.is_none() {
            p.tank2_capacitance = Some(1.0 / (tau_min * p.valve2_max));
        }
        let r = &mut self.controller.reactive;
        if r.valve1_open.is_none() {
            r.valve1_open = Some(p.valve1_max);
        }
        if r.valve2_open.is_none() {
            r.valve2_open = Some(p.valve2_max);
        }
        if r.booster_bias_psi.is_none() {
            let nominal = self.controller.mpc.y_d_setpoint_psi - p.source_pressure_psi
                + p.distribution_resistance.expect("resolved above") * self.demand.mean_gpm;
            r.booster_bias_psi = Some(nominal.clamp(p.booster_min_psi, p.booster_max_psi));
        }
    }

    /// Rewrites relative file paths against `base`.
    pub fn absolutize_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.demand.table_path);
        fix(&mut self.emissions.mix_path);
    }
}

fn missing_keys(defaults: &toml::Table, user: &toml::Table, prefix: &str, out: &mut Vec<String>) {
    for (key, dv) in defaults {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match (dv, user.get(key)) {
            (toml::Value::Table(dt), Some(toml::Value::Table(ut))) => missing_keys(dt, ut, &path, out),
            (toml::Value::Table(dt), None) => missing_keys(dt, &toml::Table::new(), &path, out),
            (_, None) => out.push(path),
            _ => {}
        }
    }
}

/// Flat `key → value` view of a configuration, for reports.
pub fn flatten(config: &Config) -> BTreeMap<String, String> {
    fn walk(t: &toml::Table, prefix: &str, out: &mut BTreeMap<String, String>) {
        for (k, v) in t {
            let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            match v {
                toml::Value::Table(inner) => walk(inner, &key, out),
                other => {
                    out.insert(key, other.to_string());
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(&toml::Table::try_from(config).expect("configuration serialises"), "", &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_all_defaults() {
        let (cfg, defaulted) = Config::from_toml_str("").unwrap();
        assert_eq!(cfg, Config::default());
        assert!(defaulted.contains(&"plant.source_pressure_psi".to_string()));
        assert!(defaulted.contains(&"controller.mpc.alpha".to_string()));
    }

    #[test]
    fn unknown_key_is_rejected_with_path() {
        let err = Config::from_toml_str("[controller.mpc]\nalpah = 0.5\n").unwrap_err();
        assert_eq!(err.code(), "E_CONFIG");
        let msg = err.to_string();
        assert!(msg.contains("controller.mpc"), "{msg}");
        assert!(msg.contains("alpah"), "{msg}");
    }

    #[test]
    fn wrong_type_names_the_key() {
        let err = Config::from_toml_str("[simulation]\ndt_min = \"fast\"\n").unwrap_err();
        assert!(err.to_string().contains("simulation.dt_min"), "{err}");
    }

    #[test]
    fn partial_section_reports_only_missing_keys() {
        let (cfg, defaulted) = Config::from_toml_str("[quality]\ndecay_per_day = 1.5\n").unwrap();
        assert_eq!(cfg.quality.decay_per_day, 1.5);
        assert!(!defaulted.contains(&"quality.decay_per_day".to_string()));
        assert!(defaulted.contains(&"quality.detention_min".to_string()));
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut cfg = Config::default();
        cfg.resolve_plant();
        let text = cfg.to_toml_string();
        let (back, defaulted) = Config::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert!(defaulted.is_empty(), "{defaulted:?}");
    }

    #[test]
    fn derived_plant_values() {
        let mut cfg = Config::default();
        cfg.resolve_plant();
        let r = cfg.plant.distribution_resistance.unwrap();
        assert!(r > 5e-4 && r < 7e-4, "{r}");
        let c2 = cfg.plant.tank2_capacitance.unwrap();
        assert!((1.0 / (c2 * cfg.plant.valve2_max) - 240.0).abs() < 1e-9);
    }
}
