//! Discrete-time model of a water-treatment plant with pumped storage.
//!
//! The plant is a linear hydraulic network (pipes, valves, pressure and flow
//! pumps, capacitive tanks) solved algebraically at every step, with chlorine
//! decay in the treated-water tank and a transport delay through treatment.
//! Two controllers drive it: a grid-search model-predictive controller that
//! trades pressure tracking, chlorine residual and grid emissions, and a
//! reactive baseline that cycles the tanks and regulates the booster with PI.
//!
//! The numerical core is generic over [`Scalar`] (`f32`/`f64`); the aliases
//! below fix it to `f64`, which is what the simulator and CLI use.

// `!(x >= 0)` is how validation rejects NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod error;
pub mod exogenous;
pub mod linalg;
pub mod network;
pub mod quality;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type NetworkModel = network::NetworkModel<f64>;
pub type ExamplePlant = network::ExamplePlant<f64>;
pub type ControlVector = network::ControlVector<f64>;
pub type ControlBounds = network::ControlBounds<f64>;
pub type HydraulicSolution = network::HydraulicSolution<f64>;
pub type PlantState = control::PlantState<f64>;
pub type MpcConfig = control::MpcConfig<f64>;
pub type ReactiveConfig = control::ReactiveConfig<f64>;
pub type DemandProfile = exogenous::DemandProfile<f64>;
pub type EmissionsIntensitySeries = exogenous::EmissionsIntensitySeries<f64>;
pub type EnergyMixRecord = exogenous::EnergyMixRecord<f64>;
