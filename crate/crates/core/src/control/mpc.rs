//! Grid-search model-predictive controller.
//!
//! Every point of a Cartesian mesh over the five actuators is rolled out over
//! the horizon with the control held fixed (move blocking). Each rollout
//! passes the candidate through the same low-pass filter the actuators see,
//! so the bounds are checked on the control that would actually be applied.
//! The cheapest feasible point wins; ties go to the lowest mesh index.

use rayon::prelude::*;

use super::filter::lowpass;
use super::plant::{OutputVector, PlantModel, PlantState, PhysicalState};
use crate::error::{Error, Result};
use crate::exogenous::{DemandProfile, EmissionsIntensitySeries};
use crate::network::{ControlBounds, ControlIndex, ControlVector, CONTROL_DIM};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights<T> {
    pub chlorine: T,
    pub pressure: T,
    pub emissions: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig<T> {
    pub weights: Weights<T>,
    /// Distribution pressure setpoint, PSI.
    pub y_d_setpoint: T,
    /// Tank-2 chlorine setpoint, mg/gal.
    pub y_c_setpoint: T,
    /// Prediction horizon in steps.
    pub horizon: usize,
    /// Mesh points per control dimension.
    pub resolution: [usize; CONTROL_DIM],
    pub bounds: ControlBounds<T>,
    /// `[lower, upper]` on every tank pressure, PSI.
    pub tank_bounds: (T, T),
    /// `[lower, upper]` on the monitored pipe pressures, PSI.
    pub pipe_bounds: (T, T),
    /// Low-pass coefficient in (0, 1].
    pub alpha: T,
}

impl<T: Scalar> MpcConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        for (key, v) in [
            ("controller.mpc.weight_chlorine", w.chlorine),
            ("controller.mpc.weight_pressure", w.pressure),
            ("controller.mpc.weight_emissions", w.emissions),
        ] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::config(key, format!("weight must be finite and >= 0, got {v}")));
            }
        }
        if self.horizon < 1 {
            return Err(Error::config("controller.mpc.horizon", "must be >= 1"));
        }
        if let Some(i) = self.resolution.iter().position(|&r| r < 2) {
            return Err(Error::config(
                format!("controller.mpc.resolution.{}", ControlIndex::ALL[i].name()),
                "need at least 2 points per dimension",
            ));
        }
        if !(self.tank_bounds.0 <= self.tank_bounds.1) {
            return Err(Error::config("controller.mpc.tank_bounds", "lower > upper"));
        }
        if !(self.pipe_bounds.0 <= self.pipe_bounds.1) {
            return Err(Error::config("controller.mpc.pipe_bounds", "lower > upper"));
        }
        if !(self.alpha > T::zero() && self.alpha <= T::one()) {
            return Err(Error::config("controller.mpc.alpha", "must be in (0, 1]"));
        }
        Ok(())
    }
}

/// `λ_C ỹ_C² + λ_D ỹ_D² + λ_E y_E²`.
pub fn stage_cost<T: Scalar>(out: &OutputVector<T>, weights: &Weights<T>) -> T {
    weights.chlorine * out.chlorine_error * out.chlorine_error
        + weights.pressure * out.pressure_error * out.pressure_error
        + weights.emissions * out.emissions_kg_h * out.emissions_kg_h
}

/// Known future inputs over a horizon starting at step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Horizon<T> {
    pub start_step: usize,
    pub demand: Vec<T>,
    pub phi: Vec<T>,
    /// Concentration leaving treatment at each horizon step.
    pub treated_concentration: Vec<T>,
}

impl<T: Scalar> Horizon<T> {
    pub fn new(
        plant: &PlantModel<T>,
        state: &PlantState<T>,
        demand: &DemandProfile<T>,
        intensity: &EmissionsIntensitySeries<T>,
        k: usize,
        steps: usize,
    ) -> Result<Self> {
        let mut h = Horizon {
            start_step: k,
            demand: Vec::with_capacity(steps),
            phi: Vec::with_capacity(steps),
            treated_concentration: Vec::with_capacity(steps),
        };
        for j in 0..steps {
            let t = T::lit((k + j) as f64) * plant.dt_min;
            h.demand.push(demand.demand_at(t)?);
            h.phi.push(intensity.at(t));
            // slots already in the delay line are known; later ones are dosed
            let c = state.delay.peek(j).map_or(plant.dose, |s| s.1);
            h.treated_concentration.push(c);
        }
        Ok(h)
    }

    pub fn len(&self) -> usize {
        self.demand.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demand.is_empty()
    }
}

/// One predicted step of a rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedStep<T> {
    pub applied: ControlVector<T>,
    pub outputs: OutputVector<T>,
    pub y_d: T,
    pub y_c: T,
    pub tanks: [T; 2],
    pub stage_cost: T,
    pub violation: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult<T> {
    pub steps: Vec<PredictedStep<T>>,
    pub cost: T,
    pub feasible: bool,
    /// Largest bound excursion over the horizon, PSI (0 when feasible).
    pub worst_violation: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Summary<T> {
    cost: T,
    worst_violation: T,
}

fn excess<T: Scalar>(v: T, (lo, hi): (T, T)) -> T {
    (lo - v).max(v - hi).max(T::zero())
}

fn rollout<T: Scalar>(
    plant: &PlantModel<T>,
    state: &PlantState<T>,
    target: &ControlVector<T>,
    horizon: &Horizon<T>,
    cfg: &MpcConfig<T>,
    mut on_step: impl FnMut(PredictedStep<T>),
) -> Result<Summary<T>> {
    let mut phys: PhysicalState<T> = state.physical;
    let mut prev = state.memory.applied;
    let mut cost = T::zero();
    let mut worst = T::zero();
    for j in 0..horizon.len() {
        let applied = lowpass(&prev, target, cfg.alpha, &cfg.bounds);
        let tr = plant.transition(
            &phys,
            &applied,
            horizon.demand[j],
            horizon.phi[j],
            horizon.treated_concentration[j],
        )?;
        let pipe = plant.pipe_pressures(&tr.solution);
        let outputs = OutputVector {
            chlorine_error: cfg.y_c_setpoint - tr.next.chlorine.concentration,
            pressure_error: cfg.y_d_setpoint - tr.solution.y_d,
            emissions_kg_h: tr.emissions_kg_h,
            pipe_pressures: pipe,
        };
        let c = stage_cost(&outputs, &cfg.weights);
        let violation = pipe
            .iter()
            .map(|p| excess(*p, cfg.pipe_bounds))
            .chain(tr.next.tanks.iter().map(|x| excess(*x, cfg.tank_bounds)))
            .fold(T::zero(), T::max);
        cost = cost + c;
        worst = worst.max(violation);
        on_step(PredictedStep {
            applied,
            outputs,
            y_d: tr.solution.y_d,
            y_c: tr.next.chlorine.concentration,
            tanks: tr.next.tanks,
            stage_cost: c,
            violation,
        });
        phys = tr.next;
        prev = applied;
    }
    Ok(Summary {
        cost,
        worst_violation: worst,
    })
}

/// Rolls the plant forward over `horizon` with the target control `u` held
/// fixed and returns per-step outputs, the accumulated cost and feasibility.
pub fn predict<T: Scalar>(
    plant: &PlantModel<T>,
    state: &PlantState<T>,
    u: &ControlVector<T>,
    horizon: &Horizon<T>,
    cfg: &MpcConfig<T>,
) -> Result<RolloutResult<T>> {
    let mut steps = Vec::with_capacity(horizon.len());
    let s = rollout(plant, state, u, horizon, cfg, |p| steps.push(p))?;
    Ok(RolloutResult {
        steps,
        cost: s.cost,
        feasible: s.worst_violation == T::zero(),
        worst_violation: s.worst_violation,
    })
}

/// Cartesian mesh over the control box, last dimension varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlMesh<T> {
    axes: [Vec<T>; CONTROL_DIM],
}

impl<T: Scalar> ControlMesh<T> {
    pub fn new(bounds: &ControlBounds<T>, resolution: &[usize; CONTROL_DIM]) -> Self {
        let axes = std::array::from_fn(|d| {
            let (lo, hi, n) = (bounds.lower[d], bounds.upper[d], resolution[d]);
            (0..n)
                .map(|i| {
                    if i + 1 == n {
                        hi
                    } else {
                        lo + (hi - lo) * T::lit(i as f64) / T::lit((n - 1) as f64)
                    }
                })
                .collect()
        });
        Self { axes }
    }

    pub fn axes(&self) -> &[Vec<T>; CONTROL_DIM] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, mut index: usize) -> ControlVector<T> {
        let mut values = [T::zero(); CONTROL_DIM];
        for d in (0..CONTROL_DIM).rev() {
            let n = self.axes[d].len();
            values[d] = self.axes[d][index % n];
            index /= n;
        }
        ControlVector { values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcDecision<T> {
    /// Selected mesh point `u*`.
    pub target: ControlVector<T>,
    /// `u*` after the low-pass filter, as sent to the actuators.
    pub applied: ControlVector<T>,
    pub mesh_index: usize,
    pub cost: T,
    pub feasible: bool,
    pub worst_violation: T,
}

/// Selection rule over `(cost, worst_violation)` pairs in mesh order: the
/// cheapest point with zero violation, else the smallest violation; the
/// earliest index wins ties. Returns the index and whether it is feasible.
pub fn select_point<T: Scalar>(scored: &[(T, T)]) -> Option<(usize, bool)> {
    // a sequential scan keeps the tie-break independent of evaluation order
    let mut best_feasible: Option<(usize, T)> = None;
    let mut least_bad: Option<(usize, T)> = None;
    for (i, &(cost, violation)) in scored.iter().enumerate() {
        if violation == T::zero() {
            if best_feasible.is_none_or(|(_, c)| cost < c) {
                best_feasible = Some((i, cost));
            }
        } else if least_bad.is_none_or(|(_, v)| violation < v) {
            least_bad = Some((i, violation));
        }
    }
    match (best_feasible, least_bad) {
        (Some((i, _)), _) => Some((i, true)),
        (None, Some((i, _))) => Some((i, false)),
        (None, None) => None,
    }
}

/// Searches the whole mesh and returns the cheapest feasible point, or the
/// point with the smallest worst violation when nothing is feasible.
pub fn mpc_step<T: Scalar>(
    plant: &PlantModel<T>,
    state: &PlantState<T>,
    horizon: &Horizon<T>,
    cfg: &MpcConfig<T>,
    mesh: &ControlMesh<T>,
) -> Result<MpcDecision<T>> {
    let summaries: Vec<Result<Summary<T>>> = (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            let u = mesh.point(i);
            rollout(plant, state, &u, horizon, cfg, |_| {}).map_err(|e| match e {
                Error::Singular { location } => Error::Singular {
                    location: format!("{location} (mesh point {i}: {:?})", u.values),
                },
                other => other,
            })
        })
        .collect();

    let scored = summaries
        .into_iter()
        .map(|s| s.map(|s| (s.cost, s.worst_violation)))
        .collect::<Result<Vec<_>>>()?;
    let (index, feasible) = select_point(&scored)
        .ok_or_else(|| Error::config("controller.mpc.resolution", "control mesh is empty"))?;
    let target = mesh.point(index);
    let result = predict(plant, state, &target, horizon, cfg)?;
    Ok(MpcDecision {
        target,
        applied: lowpass(&state.memory.applied, &target, cfg.alpha, &cfg.bounds),
        mesh_index: index,
        cost: result.cost,
        feasible,
        worst_violation: result.worst_violation,
    })
}
