//! Controllers: grid-search MPC and the reactive tank-cycling baseline.

mod filter;
mod mpc;
mod plant;
mod reactive;

pub use filter::lowpass;
pub use mpc::{
    mpc_step, predict, select_point, stage_cost, ControlMesh, Horizon, MpcConfig, MpcDecision, PredictedStep,
    RolloutResult, Weights,
};
pub use plant::{
    ControllerMemory, OutputVector, PhysicalState, PlantModel, PlantState, TankExchange,
    Transition,
};
pub use reactive::{next_mode, reactive_step, ReactiveConfig, TankMode};
