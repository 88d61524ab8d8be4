//! Hydraulic network: topology, nodal solution and tank dynamics.
//!
//! Pipes and valves are linear in pressure difference, tanks are fixed
//! pressure nodes whose pressure is a state, and pumps either prescribe a
//! pressure at their discharge or a flow through themselves. Pressures are
//! in PSI, flows in GPM, time in minutes.

mod control_vector;
mod example;
mod solve;

pub use control_vector::{ControlBounds, ControlIndex, ControlVector, CONTROL_DIM};
pub use example::{
    closed_form_yd, hazen_williams_resistance, ExamplePlant, ExamplePlantParams, PlantHandles,
};
pub use solve::{
    pump_power, solve_flows, step_tanks, HydraulicSolution, PumpPower, PSI_GPM_TO_KW,
};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type NodeId = usize;
pub type LinkId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind<T> {
    Junction,
    /// Fixed-pressure boundary such as the raw-water source.
    Reservoir { pressure: T },
    /// Storage tank; its pressure is the tank state `x[index]`.
    Tank { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node<T> {
    pub name: String,
    pub kind: NodeKind<T>,
}

/// Value taken either from configuration or from the control vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting<T> {
    Fixed(T),
    Control(ControlIndex),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinkKind<T> {
    /// `P_from - P_to = R · F`.
    Pipe { resistance: T },
    /// `F = r · (P_from - P_to)` with `r` taken from the control vector.
    Valve {
        control: ControlIndex,
        max_conductance: T,
    },
    /// Holds `P_to = P_reference + head`; the pump flow is an unknown.
    PressurePump { head: Setting<T>, reference: NodeId },
    /// Prescribes the flow from `from` to `to`.
    FlowPump { control: ControlIndex },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link<T> {
    pub name: String,
    pub from: NodeId,
    pub to: NodeId,
    pub kind: LinkKind<T>,
}

impl<T> Link<T> {
    pub fn is_pump(&self) -> bool {
        matches!(
            self.kind,
            LinkKind::PressurePump { .. } | LinkKind::FlowPump { .. }
        )
    }
}

/// Immutable plant description. Cheap to share between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel<T> {
    nodes: Vec<Node<T>>,
    links: Vec<Link<T>>,
    capacitances: Vec<T>,
    demand_node: NodeId,
    output_node: NodeId,
    /// Unknown slot of each node (junctions only).
    junction_slot: Vec<Option<usize>>,
    /// Node of each tank index.
    tank_nodes: Vec<NodeId>,
    n_junctions: usize,
    n_pressure_pumps: usize,
}

impl<T: Scalar> NetworkModel<T> {
    pub fn new(
        nodes: Vec<Node<T>>,
        links: Vec<Link<T>>,
        capacitances: Vec<T>,
        demand_node: NodeId,
        output_node: NodeId,
    ) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::config("network.nodes", "network has no nodes"));
        }
        for (key, id) in [("network.demand_node", demand_node), ("network.output_node", output_node)] {
            match nodes.get(id) {
                Some(Node {
                    kind: NodeKind::Junction,
                    ..
                }) => {}
                Some(node) => {
                    return Err(Error::config(key, format!("node `{}` is not a junction", node.name)))
                }
                None => return Err(Error::config(key, format!("node {id} does not exist"))),
            }
        }

        let mut tank_nodes = vec![usize::MAX; capacitances.len()];
        let mut junction_slot = vec![None; n];
        let mut n_junctions = 0;
        for (id, node) in nodes.iter().enumerate() {
            match node.kind {
                NodeKind::Junction => {
                    junction_slot[id] = Some(n_junctions);
                    n_junctions += 1;
                }
                NodeKind::Reservoir { pressure } => {
                    if !pressure.is_finite() {
                        return Err(Error::config(
                            format!("network.nodes.{}", node.name),
                            "reservoir pressure must be finite",
                        ));
                    }
                }
                NodeKind::Tank { index } => {
                    let slot = tank_nodes.get_mut(index).ok_or_else(|| {
                        Error::config(
                            format!("network.nodes.{}", node.name),
                            format!("tank index {index} has no capacitance"),
                        )
                    })?;
                    if *slot != usize::MAX {
                        return Err(Error::config(
                            format!("network.nodes.{}", node.name),
                            format!("tank index {index} used twice"),
                        ));
                    }
                    *slot = id;
                }
            }
        }
        if let Some(missing) = tank_nodes.iter().position(|&id| id == usize::MAX) {
            return Err(Error::config(
                "network.tanks",
                format!("tank {missing} has a capacitance but no node"),
            ));
        }
        for (j, c) in capacitances.iter().enumerate() {
            if !(*c > T::zero()) || !c.is_finite() {
                return Err(Error::config(
                    format!("network.tanks.{j}.capacitance"),
                    format!("capacitance must be > 0, got {c}"),
                ));
            }
        }

        let mut n_pressure_pumps = 0;
        for link in &links {
            let key = format!("network.links.{}", link.name);
            if link.from >= n || link.to >= n || link.from == link.to {
                return Err(Error::config(key, "link must join two distinct existing nodes"));
            }
            match &link.kind {
                LinkKind::Pipe { resistance } => {
                    if !(*resistance > T::zero()) || !resistance.is_finite() {
                        return Err(Error::config(
                            key,
                            format!("pipe resistance must be > 0, got {resistance}"),
                        ));
                    }
                }
                LinkKind::Valve {
                    max_conductance, ..
                } => {
                    if !(*max_conductance > T::zero()) || !max_conductance.is_finite() {
                        return Err(Error::config(
                            key,
                            format!("valve max conductance must be > 0, got {max_conductance}"),
                        ));
                    }
                }
                LinkKind::PressurePump { head, reference } => {
                    if *reference >= n {
                        return Err(Error::config(key, "pump reference node does not exist"));
                    }
                    if junction_slot[link.to].is_none() {
                        return Err(Error::config(
                            key,
                            "pressure pump must discharge into a junction",
                        ));
                    }
                    if let Setting::Fixed(h) = head {
                        if !h.is_finite() {
                            return Err(Error::config(key, "pump head must be finite"));
                        }
                    }
                    n_pressure_pumps += 1;
                }
                LinkKind::FlowPump { .. } => {}
            }
        }

        // connectivity over the undirected link graph
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for link in &links {
            let (a, b) = (root(&mut parent, link.from), root(&mut parent, link.to));
            parent[a] = b;
        }
        let r0 = root(&mut parent, 0);
        if let Some(isolated) = (0..n).find(|&i| root(&mut parent, i) != r0) {
            return Err(Error::config(
                format!("network.nodes.{}", nodes[isolated].name),
                "node is not connected to the rest of the network",
            ));
        }

        Ok(Self {
            nodes,
            links,
            capacitances,
            demand_node,
            output_node,
            junction_slot,
            tank_nodes,
            n_junctions,
            n_pressure_pumps,
        })
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link<T>] {
        &self.links
    }

    pub fn capacitances(&self) -> &[T] {
        &self.capacitances
    }

    pub fn n_tanks(&self) -> usize {
        self.capacitances.len()
    }

    pub fn tank_node(&self, tank: usize) -> NodeId {
        self.tank_nodes[tank]
    }

    pub fn demand_node(&self) -> NodeId {
        self.demand_node
    }

    pub fn output_node(&self) -> NodeId {
        self.output_node
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn link_id(&self, name: &str) -> Option<LinkId> {
        self.links.iter().position(|l| l.name == name)
    }

    pub(crate) fn junction_slot(&self, node: NodeId) -> Option<usize> {
        self.junction_slot[node]
    }

    pub(crate) fn n_unknowns(&self) -> usize {
        self.n_junctions + self.n_pressure_pumps
    }

    pub fn is_junction(&self, node: NodeId) -> bool {
        self.junction_slot[node].is_some()
    }

    /// Junction ids in node order.
    pub fn junctions(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&i| self.junction_slot[i].is_some())
    }
}
