//! The two-tank treatment plant: source pump, treatment block, booster,
//! distribution pipe, a raw-water tank on the source header and a treated
//! water tank on the distribution node.
//!
//! ```text
//!                 tank1                         tank2
//!             F_p1 ↑ ↓ r_1                  F_p2 ↑ ↓ r_2
//! reservoir ─P_S─▶ header ──R_T──▶ treated ─P_b─▶ boost ──R──▶ distribution ─▶ F_D
//! ```
//!
//! The booster holds its discharge `P_b` above the source header, so it makes
//! up whatever the treatment block loses and the distribution pressure obeys
//! [`closed_form_yd`] exactly.

use super::{
    ControlBounds, ControlIndex, ControlVector, Link, LinkId, LinkKind, NetworkModel, Node,
    NodeId, NodeKind, Setting,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ExamplePlantParams<T> {
    /// Source pump pressure `P_s`, PSI.
    pub source_pressure: T,
    /// Treatment block resistance `R_T`, PSI/GPM.
    pub treatment_resistance: T,
    /// Distribution pipe resistance `R`, PSI/GPM.
    pub distribution_resistance: T,
    /// Tank capacitances `[C_1, C_2]`, PSI/gallon.
    pub capacitances: [T; 2],
    pub bounds: ControlBounds<T>,
}

/// Node and link ids of the example plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlantHandles {
    pub reservoir: NodeId,
    pub header: NodeId,
    pub treated: NodeId,
    pub boost: NodeId,
    pub distribution: NodeId,
    pub tanks: [NodeId; 2],
    pub source_pump: LinkId,
    pub treatment: LinkId,
    pub booster: LinkId,
    pub distribution_pipe: LinkId,
    pub inlets: [LinkId; 2],
    pub valves: [LinkId; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExamplePlant<T> {
    pub model: NetworkModel<T>,
    pub handles: PlantHandles,
    pub params: ExamplePlantParams<T>,
}

impl<T: Scalar> ExamplePlant<T> {
    pub fn build(params: ExamplePlantParams<T>) -> Result<Self> {
        let positive = [
            ("plant.source_pressure", params.source_pressure),
            ("plant.treatment_resistance", params.treatment_resistance),
            ("plant.distribution_resistance", params.distribution_resistance),
            ("plant.tank1_capacitance", params.capacitances[0]),
            ("plant.tank2_capacitance", params.capacitances[1]),
            (
                "plant.valve1_max",
                params.bounds.upper[ControlIndex::Valve1 as usize],
            ),
            (
                "plant.valve2_max",
                params.bounds.upper[ControlIndex::Valve2 as usize],
            ),
        ];
        for (key, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::config(key, format!("must be > 0, got {v}")));
            }
        }

        let node = |name: &str, kind| Node {
            name: name.to_string(),
            kind,
        };
        let nodes = vec![
            node(
                "reservoir",
                NodeKind::Reservoir {
                    pressure: T::zero(),
                },
            ),
            node("header", NodeKind::Junction),
            node("treated", NodeKind::Junction),
            node("boost", NodeKind::Junction),
            node("distribution", NodeKind::Junction),
            node("tank1", NodeKind::Tank { index: 0 }),
            node("tank2", NodeKind::Tank { index: 1 }),
        ];
        let (reservoir, header, treated, boost, distribution, tank1, tank2) = (0, 1, 2, 3, 4, 5, 6);
        let link = |name: &str, from, to, kind| Link {
            name: name.to_string(),
            from,
            to,
            kind,
        };
        let valve_max = |idx: ControlIndex| params.bounds.upper[idx as usize];
        let links = vec![
            link(
                "source_pump",
                reservoir,
                header,
                LinkKind::PressurePump {
                    head: Setting::Fixed(params.source_pressure),
                    reference: reservoir,
                },
            ),
            link(
                "treatment",
                header,
                treated,
                LinkKind::Pipe {
                    resistance: params.treatment_resistance,
                },
            ),
            link(
                "booster",
                treated,
                boost,
                LinkKind::PressurePump {
                    head: Setting::Control(ControlIndex::Booster),
                    reference: header,
                },
            ),
            link(
                "distribution_pipe",
                boost,
                distribution,
                LinkKind::Pipe {
                    resistance: params.distribution_resistance,
                },
            ),
            link(
                "inlet1",
                header,
                tank1,
                LinkKind::FlowPump {
                    control: ControlIndex::InletPump1,
                },
            ),
            link(
                "outlet1",
                tank1,
                header,
                LinkKind::Valve {
                    control: ControlIndex::Valve1,
                    max_conductance: valve_max(ControlIndex::Valve1),
                },
            ),
            link(
                "inlet2",
                distribution,
                tank2,
                LinkKind::FlowPump {
                    control: ControlIndex::InletPump2,
                },
            ),
            link(
                "outlet2",
                tank2,
                distribution,
                LinkKind::Valve {
                    control: ControlIndex::Valve2,
                    max_conductance: valve_max(ControlIndex::Valve2),
                },
            ),
        ];
        let model = NetworkModel::new(
            nodes,
            links,
            params.capacitances.to_vec(),
            distribution,
            distribution,
        )?;
        let handles = PlantHandles {
            reservoir,
            header,
            treated,
            boost,
            distribution,
            tanks: [tank1, tank2],
            source_pump: 0,
            treatment: 1,
            booster: 2,
            distribution_pipe: 3,
            inlets: [4, 6],
            valves: [5, 7],
        };
        Ok(Self {
            model,
            handles,
            params,
        })
    }

    /// Pressures bounded by the MPC pipe constraints: the distribution node
    /// (tank 2 tee) and the booster discharge.
    pub fn monitored_nodes(&self) -> [NodeId; 2] {
        [self.handles.distribution, self.handles.boost]
    }

    pub fn closed_form_yd(&self, x2: T, u: &ControlVector<T>, demand: T) -> T {
        closed_form_yd(
            x2,
            u,
            demand,
            self.params.source_pressure,
            self.params.distribution_resistance,
        )
    }
}

/// Distribution pressure of the example plant written out by hand:
/// `(P_s + P_b − R(F_D + F_p2 − r_2·x_2)) / (1 + r_2·R)`.
pub fn closed_form_yd<T: Scalar>(
    x2: T,
    u: &ControlVector<T>,
    demand: T,
    source_pressure: T,
    resistance: T,
) -> T {
    let r2 = u.get(ControlIndex::Valve2);
    let fp2 = u.get(ControlIndex::InletPump2);
    (source_pressure + u.booster() - resistance * (demand + fp2 - r2 * x2))
        / (T::one() + r2 * resistance)
}

/// Slope `d(ΔP)/dQ` of the Hazen-Williams head loss at `flow_gpm`, PSI/GPM.
///
/// SI form `h = 10.67 · L · Q^1.852 / (C^1.852 · d^4.8704)`, converted with
/// the specific weight of water (9806.65 N/m³).
pub fn hazen_williams_resistance(diameter_in: f64, length_ft: f64, roughness: f64, flow_gpm: f64) -> f64 {
    const M_PER_IN: f64 = 0.0254;
    const M_PER_FT: f64 = 0.3048;
    const M3S_PER_GPM: f64 = 6.309_019_640_3e-5;
    const PA_PER_PSI: f64 = 6_894.757_293_168;
    const SPECIFIC_WEIGHT: f64 = 9806.65;
    const EXPONENT: f64 = 1.852;
    let d = diameter_in * M_PER_IN;
    let l = length_ft * M_PER_FT;
    let q = flow_gpm * M3S_PER_GPM;
    let head_m = 10.67 * l * q.powf(EXPONENT) / (roughness.powf(EXPONENT) * d.powf(4.8704));
    let dp_psi = head_m * SPECIFIC_WEIGHT / PA_PER_PSI;
    EXPONENT * dp_psi / flow_gpm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ExamplePlantParams<f64> {
        ExamplePlantParams {
            source_pressure: 60.0,
            treatment_resistance: 0.005,
            distribution_resistance: 0.005,
            capacitances: [5e-5, 5e-5],
            bounds: ControlBounds::new(
                [10.0, 0.0, 0.0, 0.0, 0.0],
                [40.0, 2000.0, 2000.0, 100.0, 100.0],
            )
            .unwrap(),
        }
    }

    #[test]
    fn topology() {
        let plant = ExamplePlant::build(params()).unwrap();
        assert_eq!(plant.model.n_tanks(), 2);
        assert_eq!(plant.model.links().len(), 8);
        assert_eq!(plant.model.node_id("distribution"), Some(plant.handles.distribution));
        assert_eq!(plant.model.link_id("outlet2"), Some(plant.handles.valves[1]));
    }

    #[test]
    fn rejects_nonpositive_capacitance() {
        let mut p = params();
        p.capacitances[0] = 0.0;
        let err = ExamplePlant::build(p).unwrap_err();
        assert!(err.to_string().contains("tank1_capacitance"));
        assert_eq!(err.code(), "E_CONFIG");
    }

    #[test]
    fn closed_form_examples() {
        let u = ControlVector::new(30.0, 0.0, 0.0, 0.0, 0.0);
        assert!((closed_form_yd(0.0, &u, 3500.0, 60.0, 0.005) - 72.5_f64).abs() < 1e-12);
        let u = ControlVector::new(0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((closed_form_yd(10.0, &u, 0.0, 0.0, 1.0) - 5.0_f64).abs() < 1e-12);
    }

    #[test]
    fn closed_valve_reduction() {
        let plant = ExamplePlant::build(params()).unwrap();
        let u = ControlVector::new(25.0, 300.0, 0.0, 40.0, 0.0);
        let sol = super::super::solve_flows(&plant.model, &[85.0, 90.0], &u, 3000.0).unwrap();
        assert!((sol.y_d - (60.0 + 25.0 - 0.005 * 3000.0)).abs() < 1e-9);
    }

    #[test]
    fn hazen_williams_twelve_inch_pipe() {
        // 100 ft of 12" C=130 pipe carries 3500 GPM with about 1.1 PSI loss
        let r = hazen_williams_resistance(12.0, 100.0, 130.0, 3500.0);
        let dp = r * 3500.0 / 1.852;
        assert!((1.0..1.25).contains(&dp), "{dp}");
        // the linearisation slope is the finite-difference derivative
        let loss = |q: f64| hazen_williams_resistance(12.0, 100.0, 130.0, q) * q / 1.852;
        let fd = (loss(3500.5) - loss(3499.5)) / 1.0;
        assert!((fd - r).abs() / r < 1e-6);
    }
}
