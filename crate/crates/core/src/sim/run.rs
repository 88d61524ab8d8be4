use crate::config::ControllerKind;
use crate::control::{mpc_step, reactive_step, ControlMesh, Horizon, PlantState};
use crate::error::{Error, Result};
use crate::network::ControlVector;

use super::scenario::Scenario;
use super::trace::{SimulationTrace, TraceRecord};

fn state_dump(state: &PlantState<f64>, u: &ControlVector<f64>, demand: f64) -> String {
    format!(
        "x=[{}, {}] y_c={} u={:?} demand={demand}",
        state.physical.tanks[0], state.physical.tanks[1], state.physical.chlorine.concentration, u.values
    )
}

fn out_of(v: f64, (lo, hi): (f64, f64)) -> bool {
    v < lo || v > hi
}

/// Closed loop advanced one step at a time; [`run`] drives it to the end.
#[derive(Debug)]
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    state: PlantState<f64>,
    mesh: Option<ControlMesh<f64>>,
    step: usize,
    clamp_warned: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        let mesh = match scenario.controller {
            ControllerKind::Mpc => Some(ControlMesh::new(&scenario.mpc.bounds, &scenario.mpc.resolution)),
            ControllerKind::Reactive => None,
        };
        Ok(Self {
            scenario,
            state: scenario.initial_state()?,
            mesh,
            step: 0,
            clamp_warned: false,
        })
    }

    /// State at the start of the next step.
    pub fn state(&self) -> &PlantState<f64> {
        &self.state
    }

    /// Index of the next step.
    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.scenario.steps
    }

    /// Reads demand and intensity, computes the control, advances the plant
    /// and the treatment delay line, and returns the step's record.
    pub fn step(&mut self) -> Result<TraceRecord> {
        let scenario = self.scenario;
        let plant = &scenario.plant;
        let dt = plant.dt_min;
        let k = self.step;
        let t = k as f64 * dt;
        let state = &mut self.state;
        let wrap = |state: &PlantState<f64>, u: &ControlVector<f64>, demand: f64, e: Error| Error::Simulation {
            step: k,
            state: format!("t={t} {}", state_dump(state, u, demand)),
            source: Box::new(e),
        };
        let demand = scenario
            .demand
            .demand_at(t)
            .map_err(|e| wrap(state, &state.memory.applied, f64::NAN, e))?;
        let phi = scenario.intensity.at(t);

        let (target, applied, feasible, violation) = match &self.mesh {
            Some(mesh) => {
                let horizon = Horizon::new(plant, state, &scenario.demand, &scenario.intensity, k, scenario.mpc.horizon)
                    .map_err(|e| wrap(state, &state.memory.applied, demand, e))?;
                let d = mpc_step(plant, state, &horizon, &scenario.mpc, mesh)
                    .map_err(|e| wrap(state, &state.memory.applied, demand, e))?;
                if !d.feasible {
                    log::warn!(
                        "step {k}: no feasible mesh point, applying least-violating one ({:.3} PSI)",
                        d.worst_violation
                    );
                }
                (d.target, d.applied, d.feasible, d.worst_violation)
            }
            None => {
                let (tanks, y_d) = (state.physical.tanks, state.memory.last_y_d);
                let u = reactive_step(&mut state.memory, &tanks, y_d, &scenario.reactive, dt);
                (u, u, true, 0.0)
            }
        };

        let treated = state.delay.peek(0).map_or(plant.dose, |s| s.1);
        let tr = plant
            .transition(&state.physical, &applied, demand, phi, treated)
            .map_err(|e| wrap(state, &applied, demand, e))?;
        if tr.chlorine_clamped && !self.clamp_warned {
            log::warn!("step {k}: tank-2 chlorine clamped at zero");
            self.clamp_warned = true;
        }
        let h = &plant.plant.handles;
        let treatment_flow = tr.solution.link_flows[h.treatment];
        state.delay.push_pop((treatment_flow, plant.dose));

        let pipes = plant.pipe_pressures(&tr.solution);
        let bound_violation = state.physical.tanks.iter().any(|x| out_of(*x, scenario.mpc.tank_bounds))
            || pipes.iter().any(|p| out_of(*p, scenario.mpc.pipe_bounds));
        let [tv, av] = [target.values, applied.values];
        let record = TraceRecord {
            step: k,
            t_min: t,
            demand_gpm: demand,
            phi_kg_per_kwh: phi,
            x1_psi: state.physical.tanks[0],
            x2_psi: state.physical.tanks[1],
            y_c_mg_per_gal: state.physical.chlorine.concentration,
            target_booster_psi: tv[0],
            target_inlet1_gpm: tv[1],
            target_inlet2_gpm: tv[2],
            target_valve1: tv[3],
            target_valve2: tv[4],
            booster_psi: av[0],
            inlet1_gpm: av[1],
            inlet2_gpm: av[2],
            valve1: av[3],
            valve2: av[4],
            y_d_psi: tr.solution.y_d,
            y_d_error_psi: scenario.mpc.y_d_setpoint - tr.solution.y_d,
            boost_psi: pipes[1],
            power_kw: tr.power_kw,
            y_e_kg_per_h: tr.emissions_kg_h,
            tank1_inflow_gpm: tr.tank_inflows[0],
            tank2_inflow_gpm: tr.tank_inflows[1],
            source_flow_gpm: tr.solution.link_flows[h.source_pump],
            treatment_flow_gpm: treatment_flow,
            continuity_residual: tr.solution.continuity_residual(&plant.plant.model),
            mpc_feasible: feasible,
            mpc_violation_psi: violation,
            bound_violation,
            chlorine_clamped: tr.chlorine_clamped,
        };

        state.memory.applied = applied;
        state.memory.last_y_d = tr.solution.y_d;
        state.physical = tr.next;
        self.step += 1;
        Ok(record)
    }
}

/// Runs the scenario's controller over the whole horizon.
pub fn run(scenario: &Scenario) -> Result<SimulationTrace> {
    let mut sim = Simulation::new(scenario)?;
    let mut records = Vec::with_capacity(scenario.steps);
    while !sim.is_done() {
        records.push(sim.step()?);
    }
    Ok(SimulationTrace {
        controller: scenario.controller,
        dt_min: scenario.plant.dt_min,
        records,
    })
}
