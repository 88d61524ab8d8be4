use super::{ControlVector, LinkKind, NetworkModel, NodeId, NodeKind, Setting};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// kW per PSI·GPM: 6894.757 Pa × 6.309020e-5 m³/s.
pub const PSI_GPM_TO_KW: f64 = 6_894.757_293_168 * 6.309_019_640_3e-5 / 1000.0;

/// Pressures and flows of one algebraic solve.
#[derive(Debug, Clone, PartialEq)]
pub struct HydraulicSolution<T> {
    /// PSI, indexed by node id.
    pub node_pressures: Vec<T>,
    /// GPM, indexed by link id, positive in the `from → to` direction.
    pub link_flows: Vec<T>,
    /// Extraction at the demand node, GPM.
    pub demand: T,
    /// Pressure at the distribution output node, PSI.
    pub y_d: T,
    /// Σ pump power, PSI·GPM.
    pub pump_power: T,
}

impl<T: Scalar> HydraulicSolution<T> {
    /// Signed net inflow into a node (inflows minus outflows minus demand).
    pub fn net_inflow(&self, model: &NetworkModel<T>, node: NodeId) -> T {
        let mut acc = T::zero();
        for (link, &f) in model.links().iter().zip(&self.link_flows) {
            if link.to == node {
                acc = acc + f;
            }
            if link.from == node {
                acc = acc - f;
            }
        }
        if node == model.demand_node() {
            acc = acc - self.demand;
        }
        acc
    }

    /// Net inflow into each tank, GPM.
    pub fn tank_inflows(&self, model: &NetworkModel<T>) -> Vec<T> {
        (0..model.n_tanks())
            .map(|j| self.net_inflow(model, model.tank_node(j)))
            .collect()
    }

    /// Largest junction imbalance relative to the largest flow incident on
    /// that junction (demand included).
    pub fn continuity_residual(&self, model: &NetworkModel<T>) -> T {
        let mut worst = T::zero();
        for node in model.junctions() {
            let mut scale = if node == model.demand_node() {
                self.demand.abs()
            } else {
                T::zero()
            };
            for (link, &f) in model.links().iter().zip(&self.link_flows) {
                if link.to == node || link.from == node {
                    scale = scale.max(f.abs());
                }
            }
            let imbalance = self.net_inflow(model, node).abs();
            if scale > T::zero() {
                worst = worst.max(imbalance / scale);
            } else {
                worst = worst.max(imbalance);
            }
        }
        worst
    }
}

/// Assembles and solves the nodal system for the given tank pressures,
/// controls and demand.
///
/// Unknowns are the junction pressures followed by the flows of the
/// pressure-prescribing pumps. Row `i < n_junctions` is continuity at that
/// junction; the remaining rows are the pump pressure constraints.
pub fn solve_flows<T: Scalar>(
    model: &NetworkModel<T>,
    tank_pressures: &[T],
    u: &ControlVector<T>,
    demand: T,
) -> Result<HydraulicSolution<T>> {
    debug_assert_eq!(tank_pressures.len(), model.n_tanks());
    let n_j = model.junctions().count();
    let n = model.n_unknowns();
    let mut a = DenseMatrix::<T>::zeros(n);
    let mut rhs = vec![T::zero(); n];

    let known = |node: NodeId| -> T {
        match model.nodes()[node].kind {
            NodeKind::Reservoir { pressure } => pressure,
            NodeKind::Tank { index } => tank_pressures[index],
            NodeKind::Junction => unreachable!("junction pressure is an unknown"),
        }
    };

    // row convention: Σ outflow − Σ inflow = −demand
    if let Some(d) = model.junction_slot(model.demand_node()) {
        rhs[d] = -demand;
    }
    let mut pump_slot = n_j;
    let mut pump_slots = vec![usize::MAX; model.links().len()];
    for (lid, link) in model.links().iter().enumerate() {
        let from = model.junction_slot(link.from);
        let to = model.junction_slot(link.to);
        match &link.kind {
            LinkKind::Pipe { .. } | LinkKind::Valve { .. } => {
                let g = conductance(&link.kind, u);
                if g == T::zero() {
                    continue;
                }
                match (from, to) {
                    (Some(f), Some(t)) => {
                        a.add(f, f, g);
                        a.add(f, t, -g);
                        a.add(t, t, g);
                        a.add(t, f, -g);
                    }
                    (Some(f), None) => {
                        a.add(f, f, g);
                        rhs[f] = rhs[f] + g * known(link.to);
                    }
                    (None, Some(t)) => {
                        a.add(t, t, g);
                        rhs[t] = rhs[t] + g * known(link.from);
                    }
                    (None, None) => {}
                }
            }
            LinkKind::FlowPump { control } => {
                let q = u.get(*control);
                if let Some(f) = from {
                    rhs[f] = rhs[f] - q;
                }
                if let Some(t) = to {
                    rhs[t] = rhs[t] + q;
                }
            }
            LinkKind::PressurePump { head, reference } => {
                let m = pump_slot;
                pump_slot += 1;
                pump_slots[lid] = m;
                if let Some(f) = from {
                    a.add(f, m, T::one());
                }
                let t = to.expect("validated: pressure pump discharges into a junction");
                a.add(t, m, -T::one());
                // P_to − P_ref = head
                a.add(m, t, T::one());
                let h = match head {
                    Setting::Fixed(h) => *h,
                    Setting::Control(idx) => u.get(*idx),
                };
                rhs[m] = h;
                match model.junction_slot(*reference) {
                    Some(r) => a.add(m, r, -T::one()),
                    None => rhs[m] = rhs[m] + known(*reference),
                }
            }
        }
    }

    a.solve(&mut rhs).map_err(|row| Error::Singular {
        location: describe_row(model, row, n_j),
    })?;

    let node_pressures: Vec<T> = (0..model.nodes().len())
        .map(|id| match model.junction_slot(id) {
            Some(s) => rhs[s],
            None => known(id),
        })
        .collect();
    let link_flows: Vec<T> = model
        .links()
        .iter()
        .enumerate()
        .map(|(lid, link)| match &link.kind {
            LinkKind::Pipe { .. } | LinkKind::Valve { .. } => {
                conductance(&link.kind, u) * (node_pressures[link.from] - node_pressures[link.to])
            }
            LinkKind::FlowPump { control } => u.get(*control),
            LinkKind::PressurePump { .. } => rhs[pump_slots[lid]],
        })
        .collect();

    let mut sol = HydraulicSolution {
        y_d: node_pressures[model.output_node()],
        node_pressures,
        link_flows,
        demand,
        pump_power: T::zero(),
    };
    sol.pump_power = pump_power(model, &sol).total;
    Ok(sol)
}

fn conductance<T: Scalar>(kind: &LinkKind<T>, u: &ControlVector<T>) -> T {
    match kind {
        LinkKind::Pipe { resistance } => T::one() / *resistance,
        LinkKind::Valve { control, .. } => u.get(*control),
        _ => T::zero(),
    }
}

fn describe_row<T: Scalar>(model: &NetworkModel<T>, row: usize, n_j: usize) -> String {
    if row < n_j {
        let node = model
            .junctions()
            .nth(row)
            .expect("row index is a junction slot");
        format!("node `{}`", model.nodes()[node].name)
    } else {
        let pump = model
            .links()
            .iter()
            .filter(|l| matches!(l.kind, LinkKind::PressurePump { .. }))
            .nth(row - n_j)
            .expect("row index is a pump slot");
        format!("pump `{}`", pump.name)
    }
}

/// Per-pump hydraulic power `F · (P_out − P_in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpPower<T> {
    /// `(link id, PSI·GPM)` for every pump link. Pumps running backwards do
    /// not return energy to the grid, so each entry is floored at zero.
    pub per_pump: Vec<(usize, T)>,
    pub total: T,
}

impl<T: Scalar> PumpPower<T> {
    pub fn total_kw(&self) -> T {
        self.total * T::lit(PSI_GPM_TO_KW)
    }
}

pub fn pump_power<T: Scalar>(model: &NetworkModel<T>, sol: &HydraulicSolution<T>) -> PumpPower<T> {
    let per_pump: Vec<(usize, T)> = model
        .links()
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_pump())
        .map(|(lid, l)| {
            let lift = sol.node_pressures[l.to] - sol.node_pressures[l.from];
            (lid, (sol.link_flows[lid] * lift).max(T::zero()))
        })
        .collect();
    let total = per_pump.iter().map(|(_, p)| *p).sum();
    PumpPower { per_pump, total }
}

/// Explicit tank update `x_j + C_j · Δt · Σ F_in`.
pub fn step_tanks<T: Scalar>(
    model: &NetworkModel<T>,
    tank_pressures: &[T],
    sol: &HydraulicSolution<T>,
    dt_min: T,
) -> Vec<T> {
    tank_pressures
        .iter()
        .zip(model.capacitances())
        .enumerate()
        .map(|(j, (&x, &c))| x + c * dt_min * sol.net_inflow(model, model.tank_node(j)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::{ControlIndex, Link, Node};
    use super::*;

    fn node<T>(name: &str, kind: NodeKind<T>) -> Node<T> {
        Node {
            name: name.into(),
            kind,
        }
    }

    /// reservoir(10) --pipe R=1-- j --pipe R=1e9-- out(0); demand at j.
    fn single_pipe() -> NetworkModel<f64> {
        NetworkModel::new(
            vec![
                node("hi", NodeKind::Reservoir { pressure: 10.0 }),
                node("j", NodeKind::Junction),
                node("lo", NodeKind::Reservoir { pressure: 0.0 }),
            ],
            vec![
                Link {
                    name: "p1".into(),
                    from: 0,
                    to: 1,
                    kind: LinkKind::Pipe { resistance: 0.5 },
                },
                Link {
                    name: "p2".into(),
                    from: 1,
                    to: 2,
                    kind: LinkKind::Pipe { resistance: 0.5 },
                },
            ],
            vec![],
            1,
            1,
        )
        .unwrap()
    }

    #[test]
    fn pipe_law_between_fixed_pressures() {
        // two R = 0.5 pipes in series form one R = 1 pipe
        let m = single_pipe();
        let sol = solve_flows(&m, &[], &ControlVector::zeros(), 0.0).unwrap();
        assert!((sol.link_flows[0] - 10.0).abs() < 1e-12);
        assert!((sol.link_flows[1] - 10.0).abs() < 1e-12);
        assert!((sol.y_d - 5.0).abs() < 1e-12);
        assert_eq!(sol.pump_power, 0.0);
    }

    #[test]
    fn demand_is_drawn_from_both_sides() {
        let m = single_pipe();
        let sol = solve_flows(&m, &[], &ControlVector::zeros(), 4.0).unwrap();
        assert!((sol.link_flows[0] - sol.link_flows[1] - 4.0).abs() < 1e-12);
        assert!(sol.continuity_residual(&m) < 1e-12);
    }

    #[test]
    fn closed_valve_isolates_junction() {
        let m = NetworkModel::new(
            vec![
                node("tank", NodeKind::Tank { index: 0 }),
                node("j", NodeKind::Junction),
            ],
            vec![Link {
                name: "v".into(),
                from: 0,
                to: 1,
                kind: LinkKind::Valve {
                    control: ControlIndex::Valve1,
                    max_conductance: 10.0,
                },
            }],
            vec![1.0],
            1,
            1,
        )
        .unwrap();
        let err = solve_flows(&m, &[5.0], &ControlVector::zeros(), 0.0).unwrap_err();
        assert!(err.to_string().contains("node `j`"), "{err}");

        let mut u = ControlVector::zeros();
        u.set(ControlIndex::Valve1, 2.0);
        let sol = solve_flows(&m, &[5.0], &u, 3.0).unwrap();
        assert!((sol.y_d - 3.5_f64).abs() < 1e-12);
    }

    #[test]
    fn tank_update_arithmetic() {
        let m = NetworkModel::new(
            vec![
                node("src", NodeKind::Reservoir { pressure: 0.0 }),
                node("j", NodeKind::Junction),
                node("tank", NodeKind::Tank { index: 0 }),
            ],
            vec![
                Link {
                    name: "pipe".into(),
                    from: 0,
                    to: 1,
                    kind: LinkKind::Pipe { resistance: 1.0 },
                },
                Link {
                    name: "fill".into(),
                    from: 1,
                    to: 2,
                    kind: LinkKind::FlowPump {
                        control: ControlIndex::InletPump1,
                    },
                },
            ],
            vec![0.5],
            1,
            1,
        )
        .unwrap();
        let mut u = ControlVector::zeros();
        let sol = solve_flows(&m, &[7.0], &u, 0.0).unwrap();
        assert_eq!(step_tanks(&m, &[7.0], &sol, 1.0), vec![7.0]);

        u.set(ControlIndex::InletPump1, 4.0);
        let sol = solve_flows(&m, &[7.0], &u, 0.0).unwrap();
        assert_eq!(step_tanks(&m, &[7.0], &sol, 1.0), vec![9.0]);
        // the pump lifts 4 GPM from j (at −4 PSI) into the tank at 7 PSI
        let p = pump_power(&m, &sol);
        assert!((p.total - 4.0_f64 * 11.0).abs() < 1e-12);
    }

    #[test]
    fn power_conversion() {
        let kw = 5000.0 * PSI_GPM_TO_KW;
        assert!((kw - 2.173).abs() / 2.173 < 1e-3, "{kw}");
        assert!((PSI_GPM_TO_KW - 4.3499e-4).abs() < 1e-8);
    }
}
