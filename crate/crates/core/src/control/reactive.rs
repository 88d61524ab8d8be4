//! Heuristic baseline: each tank fills at a fixed pump flow until its high
//! threshold, then drains through a fully open valve until its low
//! threshold; the booster tracks the distribution setpoint with PI.

use crate::error::{Error, Result};
use crate::network::{ControlIndex, ControlVector};
use crate::scalar::Scalar;

use super::plant::ControllerMemory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TankMode {
    Filling,
    Draining,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactiveConfig<T> {
    /// `(low, high)` hysteresis thresholds per tank, PSI.
    pub thresholds: [(T, T); 2],
    /// Inlet pump flow while filling, GPM.
    pub fill_flow: [T; 2],
    /// Outlet valve conductance while draining, GPM/PSI.
    pub valve_open: [T; 2],
    pub kp: T,
    /// Integral gain, PSI per PSI·min.
    pub ki: T,
    /// Booster pressure with zero error and zero integrator, PSI.
    pub booster_bias: T,
    pub booster_limits: (T, T),
    pub y_d_setpoint: T,
}

impl<T: Scalar> ReactiveConfig<T> {
    pub fn validate(&self) -> Result<()> {
        for (j, (lo, hi)) in self.thresholds.iter().enumerate() {
            if !(lo < hi) {
                return Err(Error::config(
                    format!("controller.reactive.tank{}_low", j + 1),
                    format!("low threshold {lo} must be below high threshold {hi}"),
                ));
            }
        }
        if !(self.kp >= T::zero()) || !(self.ki >= T::zero()) {
            return Err(Error::config("controller.reactive.kp", "PI gains must be >= 0"));
        }
        if !(self.booster_limits.0 <= self.booster_limits.1) {
            return Err(Error::config("controller.reactive.booster_limits", "lower > upper"));
        }
        Ok(())
    }
}

/// Next hysteresis mode for one tank.
pub fn next_mode<T: Scalar>(mode: TankMode, pressure: T, (low, high): (T, T)) -> TankMode {
    match mode {
        TankMode::Filling if pressure >= high => TankMode::Draining,
        TankMode::Draining if pressure <= low => TankMode::Filling,
        m => m,
    }
}

/// Updates the tank modes and PI integrator in `memory` and returns the
/// control for this step.
pub fn reactive_step<T: Scalar>(
    memory: &mut ControllerMemory<T>,
    tanks: &[T; 2],
    y_d_measured: T,
    cfg: &ReactiveConfig<T>,
    dt_min: T,
) -> ControlVector<T> {
    let mut u = ControlVector::zeros();
    #[allow(clippy::needless_range_loop)]
    for j in 0..2 {
        memory.tank_modes[j] = next_mode(memory.tank_modes[j], tanks[j], cfg.thresholds[j]);
        match memory.tank_modes[j] {
            TankMode::Filling => u.set(ControlIndex::inlet_pump(j), cfg.fill_flow[j]),
            TankMode::Draining => u.set(ControlIndex::valve(j), cfg.valve_open[j]),
        }
    }

    let (lo, hi) = cfg.booster_limits;
    let error = cfg.y_d_setpoint - y_d_measured;
    let mut integral = memory.pi_integral + error * dt_min;
    if cfg.ki > T::zero() {
        // anti-windup: the integral term alone never leaves the booster range
        let i_lo = (lo - cfg.booster_bias) / cfg.ki;
        let i_hi = (hi - cfg.booster_bias) / cfg.ki;
        integral = integral.max(i_lo).min(i_hi);
    }
    memory.pi_integral = integral;
    let booster = cfg.booster_bias + cfg.kp * error + cfg.ki * integral;
    u.set(ControlIndex::Booster, booster.max(lo).min(hi));
    u
}
