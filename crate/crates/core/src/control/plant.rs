use crate::error::Result;
use crate::network::{
    solve_flows, step_tanks, ControlVector, ExamplePlant, HydraulicSolution, PSI_GPM_TO_KW,
};
use crate::quality::{step_chlorine, ChlorineParams, ChlorineState, TransportDelay};
use crate::scalar::Scalar;

use super::reactive::TankMode;

/// Example plant together with its water-quality parameters and step length.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel<T> {
    pub plant: ExamplePlant<T>,
    pub chlorine: ChlorineParams<T>,
    /// Chlorine concentration of water leaving treatment, mg/gal.
    pub dose: T,
    pub dt_min: T,
}

/// The dynamic part of the plant: tank pressures and tank-2 chlorine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalState<T> {
    pub tanks: [T; 2],
    pub chlorine: ChlorineState<T>,
}

/// Controller memory carried between steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerMemory<T> {
    /// Last control sent to the actuators (low-pass filter state).
    pub applied: ControlVector<T>,
    pub pi_integral: T,
    pub tank_modes: [TankMode; 2],
    /// Most recent distribution pressure measurement, PSI.
    pub last_y_d: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState<T> {
    pub physical: PhysicalState<T>,
    pub delay: TransportDelay<T>,
    pub memory: ControllerMemory<T>,
}

/// `y(k)`: tracking errors, emissions rate and monitored pipe pressures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputVector<T> {
    /// `y_C,sp − y_C`, mg/gal.
    pub chlorine_error: T,
    /// `y_D,sp − y_D`, PSI.
    pub pressure_error: T,
    /// kg CO2 per hour.
    pub emissions_kg_h: T,
    /// Distribution node and booster discharge, PSI.
    pub pipe_pressures: [T; 2],
}

/// Flows exchanged between tank 2 and the distribution node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TankExchange<T> {
    pub inflow: T,
    pub inflow_concentration: T,
    pub outflow: T,
}

/// Result of advancing the plant one step under a fixed control.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub solution: HydraulicSolution<T>,
    pub next: PhysicalState<T>,
    pub tank_inflows: [T; 2],
    pub power_kw: T,
    pub emissions_kg_h: T,
    pub exchange: TankExchange<T>,
    pub chlorine_clamped: bool,
}

impl<T: Scalar> PlantModel<T> {
    /// Tank-2 inflow, its concentration, and outflow, from a hydraulic
    /// solution. Water at the distribution node is treated water from the
    /// distribution pipe mixed with whatever tank 2 discharges.
    pub fn tank2_exchange(
        &self,
        sol: &HydraulicSolution<T>,
        tank_concentration: T,
        treated_concentration: T,
    ) -> TankExchange<T> {
        let h = &self.plant.handles;
        let pump = sol.link_flows[h.inlets[1]].max(T::zero());
        let valve = sol.link_flows[h.valves[1]];
        let pipe_in = sol.link_flows[h.distribution_pipe].max(T::zero());
        let discharge = valve.max(T::zero());
        let mixed = pipe_in + discharge;
        let c_node = if mixed > T::zero() {
            (pipe_in * treated_concentration + discharge * tank_concentration) / mixed
        } else {
            treated_concentration
        };
        TankExchange {
            inflow: pump + (-valve).max(T::zero()),
            inflow_concentration: c_node,
            outflow: discharge,
        }
    }

    pub fn transition(
        &self,
        state: &PhysicalState<T>,
        u: &ControlVector<T>,
        demand: T,
        phi: T,
        treated_concentration: T,
    ) -> Result<Transition<T>> {
        let model = &self.plant.model;
        let solution = solve_flows(model, &state.tanks, u, demand)?;
        let next_tanks = step_tanks(model, &state.tanks, &solution, self.dt_min);
        let inflows = solution.tank_inflows(model);
        let exchange = self.tank2_exchange(&solution, state.chlorine.concentration, treated_concentration);
        let chl = step_chlorine(
            state.chlorine,
            exchange.inflow,
            exchange.inflow_concentration,
            exchange.outflow,
            self.dt_min,
            &self.chlorine,
        )?;
        let power_kw = solution.pump_power * T::lit(PSI_GPM_TO_KW);
        Ok(Transition {
            next: PhysicalState {
                tanks: [next_tanks[0], next_tanks[1]],
                chlorine: chl.state,
            },
            tank_inflows: [inflows[0], inflows[1]],
            power_kw,
            emissions_kg_h: phi * power_kw,
            exchange,
            chlorine_clamped: chl.clamped,
            solution,
        })
    }

    /// Pressures constrained by the pipe bounds.
    pub fn pipe_pressures(&self, sol: &HydraulicSolution<T>) -> [T; 2] {
        let [a, b] = self.plant.monitored_nodes();
        [sol.node_pressures[a], sol.node_pressures[b]]
    }

    /// Volume proxy of a tank, `x / C` gallons.
    pub fn tank_volume(&self, tank: usize, pressure: T) -> T {
        pressure / self.plant.model.capacitances()[tank]
    }
}
