use std::path::Path;

use crate::config::{Config, ControllerKind, EmissionsSource};
use crate::control::{
    ControllerMemory, MpcConfig, PhysicalState, PlantModel, PlantState, ReactiveConfig, TankMode,
    Weights,
};
use crate::error::{Error, Result};
use crate::exogenous::{
    fit_emissions_coefficients, intensity_series, load_demand_csv, load_mix_csv, synthetic_mix,
    DemandNoise, DemandProfile, EmissionFit, EmissionsIntensitySeries, SYNTHETIC_COEFFICIENTS,
};
use crate::network::{
    solve_flows, ControlBounds, ControlIndex, ControlVector, ExamplePlant, ExamplePlantParams,
    PSI_GPM_TO_KW,
};
use crate::quality::{ChlorineParams, ChlorineState, TransportDelay};

/// Everything needed to run one closed-loop simulation.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Effective configuration with every derived value filled in.
    pub config: Config,
    pub plant: PlantModel<f64>,
    pub demand: DemandProfile<f64>,
    pub intensity: EmissionsIntensitySeries<f64>,
    /// Least-squares fit behind the intensity series, when there is one.
    pub emission_fit: Option<EmissionFit<f64>>,
    pub mpc: MpcConfig<f64>,
    pub reactive: ReactiveConfig<f64>,
    pub controller: ControllerKind,
    pub steps: usize,
    pub warmup_steps: usize,
}

impl Scenario {
    /// Builds a scenario; relative paths in `config` are taken relative to
    /// `base_dir`.
    pub fn from_config(mut config: Config, base_dir: &Path) -> Result<Self> {
        config.absolutize_paths(base_dir);
        config.resolve_plant();
        let sim = config.simulation.clone();
        if !(sim.dt_min > 0.0) {
            return Err(Error::config("simulation.dt_min", "must be > 0"));
        }
        if !(sim.duration_h > 0.0) {
            return Err(Error::config("simulation.duration_h", "must be > 0"));
        }
        let steps = (sim.duration_h * 60.0 / sim.dt_min).round() as usize;
        let warmup_steps = if sim.exclude_warmup {
            ((sim.warmup_h * 60.0 / sim.dt_min).round() as usize).min(steps)
        } else {
            0
        };

        let p = &config.plant;
        let bounds = ControlBounds::new(
            [p.booster_min_psi, 0.0, 0.0, 0.0, 0.0],
            [
                p.booster_max_psi,
                p.inlet1_max_gpm,
                p.inlet2_max_gpm,
                p.valve1_max,
                p.valve2_max,
            ],
        )?;
        let plant = ExamplePlant::build(ExamplePlantParams {
            source_pressure: p.source_pressure_psi,
            treatment_resistance: p.treatment_resistance,
            distribution_resistance: p.distribution_resistance.expect("resolved"),
            capacitances: [
                p.tank1_capacitance.expect("resolved"),
                p.tank2_capacitance.expect("resolved"),
            ],
            bounds,
        })?;

        let q = &config.quality;
        let chlorine = ChlorineParams {
            decay_per_day: q.decay_per_day,
            mode: q.mode,
        };
        chlorine.validate(sim.dt_min)?;
        if !(q.dose_mg_per_gal >= 0.0) {
            return Err(Error::config("quality.dose_mg_per_gal", "must be >= 0"));
        }
        let plant = PlantModel {
            plant,
            chlorine,
            dose: q.dose_mg_per_gal,
            dt_min: sim.dt_min,
        };

        let d = &config.demand;
        let demand = match &d.table_path {
            Some(path) => DemandProfile::Table(load_demand_csv(path)?),
            None => DemandProfile::Cyclic {
                mean_gpm: d.mean_gpm,
                amplitude: d.amplitude,
                peak_hour: d.peak_hour,
                noise: (d.noise_amplitude > 0.0).then_some(DemandNoise {
                    amplitude: d.noise_amplitude,
                    seed: sim.seed,
                    interval_min: d.noise_interval_min,
                }),
            },
        };
        demand.validate()?;

        let mc = &config.controller.mpc;
        let hours = ((sim.duration_h * 60.0 + mc.horizon_steps as f64 * sim.dt_min) / 60.0).ceil() as usize + 2;
        let e = &config.emissions;
        let (intensity, emission_fit) = match e.source {
            EmissionsSource::Constant => {
                if !(e.constant_phi >= 0.0) {
                    return Err(Error::config("emissions.constant_phi", "must be >= 0"));
                }
                (EmissionsIntensitySeries::constant(e.constant_phi, hours)?, None)
            }
            EmissionsSource::Synthetic => {
                // the fit needs more hours than sources, so short runs still get a full day
                let mix = synthetic_mix(hours.max(24), sim.seed, &SYNTHETIC_COEFFICIENTS, e.ghg_noise);
                let fit = fit_emissions_coefficients(&mix)?;
                (intensity_series(&fit.coefficients, &mix, hours)?, Some(fit))
            }
            EmissionsSource::Csv => {
                let path = e
                    .mix_path
                    .as_ref()
                    .ok_or_else(|| Error::config("emissions.mix_path", "required when source = \"csv\""))?;
                let mix = load_mix_csv(path)?;
                let fit = fit_emissions_coefficients(&mix)?;
                if mix.len() < hours {
                    log::warn!(
                        "mix {} covers {} h of the {hours} h needed; the last hour is held",
                        path.display(),
                        mix.len()
                    );
                }
                (intensity_series(&fit.coefficients, &mix, mix.len())?, Some(fit))
            }
        };

        let reactive_section = &config.controller.reactive;
        let booster_bias = reactive_section.booster_bias_psi.expect("resolved");

        // emission scale: peak intensity times pumping power at the nominal
        // operating point
        if mc.scale_emissions_kg_h.is_none() {
            let mut u = ControlVector::zeros();
            u.set(ControlIndex::Booster, booster_bias);
            let mid = 0.5 * (mc.tank_min_psi + mc.tank_max_psi);
            let sol = solve_flows(&plant.plant.model, &[mid, mid], &u, d.mean_gpm)?;
            let peak = intensity.hourly().iter().copied().fold(0.0, f64::max);
            let scale = peak * sol.pump_power * PSI_GPM_TO_KW;
            config.controller.mpc.scale_emissions_kg_h = Some(if scale > 0.0 { scale } else { 1.0 });
        }
        let mc = &config.controller.mpc;
        for (key, v) in [
            ("controller.mpc.scale_pressure_psi", mc.scale_pressure_psi),
            ("controller.mpc.scale_chlorine_mg_per_gal", mc.scale_chlorine_mg_per_gal),
            ("controller.mpc.scale_emissions_kg_h", mc.scale_emissions_kg_h.expect("resolved")),
        ] {
            if !(v > 0.0) {
                return Err(Error::config(key, "scale must be > 0"));
            }
        }
        let mpc = MpcConfig {
            weights: Weights {
                chlorine: mc.priority_chlorine / mc.scale_chlorine_mg_per_gal.powi(2),
                pressure: mc.priority_pressure / mc.scale_pressure_psi.powi(2),
                emissions: mc.priority_emissions / mc.scale_emissions_kg_h.expect("resolved").powi(2),
            },
            y_d_setpoint: mc.y_d_setpoint_psi,
            y_c_setpoint: mc.y_c_setpoint_mg_per_gal,
            horizon: mc.horizon_steps,
            resolution: mc.resolution,
            bounds,
            tank_bounds: (mc.tank_min_psi, mc.tank_max_psi),
            pipe_bounds: (mc.pipe_min_psi, mc.pipe_max_psi),
            alpha: mc.alpha,
        };
        mpc.validate()?;

        let r = reactive_section;
        let reactive = ReactiveConfig {
            thresholds: [
                (r.tank1_low_psi, r.tank1_high_psi),
                (r.tank2_low_psi, r.tank2_high_psi),
            ],
            fill_flow: [r.fill1_gpm, r.fill2_gpm],
            valve_open: [r.valve1_open.expect("resolved"), r.valve2_open.expect("resolved")],
            kp: r.kp,
            ki: r.ki,
            booster_bias,
            booster_limits: (p.booster_min_psi, p.booster_max_psi),
            y_d_setpoint: mc.y_d_setpoint_psi,
        };
        reactive.validate()?;
        for (key, v) in [
            ("controller.reactive.fill1_gpm", r.fill1_gpm),
            ("controller.reactive.fill2_gpm", r.fill2_gpm),
        ] {
            if !(v >= 0.0) {
                return Err(Error::config(key, "must be >= 0"));
            }
        }

        let controller = config.controller.kind;
        Ok(Scenario {
            config,
            plant,
            demand,
            intensity,
            emission_fit,
            mpc,
            reactive,
            controller,
            steps,
            warmup_steps,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let loaded = Config::load(path)?;
        Self::from_config(loaded.config, &loaded.base_dir)
    }

    /// Plant and controller state at `t = 0`.
    pub fn initial_state(&self) -> Result<PlantState<f64>> {
        let s = &self.config.simulation;
        let tanks = [s.initial_tank1_psi, s.initial_tank2_psi];
        let caps = self.plant.plant.model.capacitances();
        if let Some(j) = tanks.iter().position(|x| !(*x > 0.0)) {
            return Err(Error::config(
                format!("simulation.initial_tank{}_psi", j + 1),
                "must be > 0",
            ));
        }
        if !(s.initial_chlorine_mg_per_gal >= 0.0) {
            return Err(Error::config("simulation.initial_chlorine_mg_per_gal", "must be >= 0"));
        }
        let delay = TransportDelay::new(
            self.config.quality.detention_min,
            self.plant.dt_min,
            (self.config.demand.mean_gpm, self.plant.dose),
        )?;
        let mut applied = ControlVector::zeros();
        applied.set(ControlIndex::Booster, self.reactive.booster_bias);
        let mode = if self.config.controller.reactive.initially_filling {
            TankMode::Filling
        } else {
            TankMode::Draining
        };
        Ok(PlantState {
            physical: PhysicalState {
                tanks,
                chlorine: ChlorineState {
                    concentration: s.initial_chlorine_mg_per_gal,
                    volume: tanks[1] / caps[1],
                },
            },
            delay,
            memory: ControllerMemory {
                applied,
                pi_integral: 0.0,
                tank_modes: [mode; 2],
                last_y_d: self.mpc.y_d_setpoint,
            },
        })
    }

    /// Same scenario with another controller.
    pub fn with_controller(&self, kind: ControllerKind) -> Self {
        let mut s = self.clone();
        s.controller = kind;
        s.config.controller.kind = kind;
        s
    }
}
