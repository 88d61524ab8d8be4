//! Chlorine residual in the treated-water tank and the flocculation delay
//! through the treatment block.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MIN_PER_DAY: f64 = 1440.0;

/// Right-hand side used for the tank concentration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChlorineMode {
    /// `dy/dt = F_in (c_in − y) / V − K y`: inflow mixes into the tank volume.
    #[default]
    WellMixed,
    /// `dy/dt = F_in c_in − K y`: inflow enters as a raw source term.
    SourceTerm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChlorineParams<T> {
    /// First-order bulk decay rate, 1/day.
    pub decay_per_day: T,
    pub mode: ChlorineMode,
}

/// Concentration (mg/gal) and volume (gal) of the tank contents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChlorineState<T> {
    pub concentration: T,
    pub volume: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChlorineStep<T> {
    pub state: ChlorineState<T>,
    /// The Euler update undershot zero and was clamped.
    pub clamped: bool,
}

impl<T: Scalar> ChlorineParams<T> {
    pub fn decay_per_min(&self) -> T {
        self.decay_per_day / T::lit(MIN_PER_DAY)
    }

    pub fn validate(&self, dt_min: T) -> Result<()> {
        if !(self.decay_per_day >= T::zero()) || !self.decay_per_day.is_finite() {
            return Err(Error::config("quality.decay_per_day", "must be >= 0"));
        }
        if !(dt_min > T::zero()) {
            return Err(Error::config("simulation.dt_min", "must be > 0"));
        }
        if !(self.decay_per_min() * dt_min < T::one()) {
            return Err(Error::config(
                "quality.decay_per_day",
                "decay rate times step must be < 1 for a stable explicit update",
            ));
        }
        Ok(())
    }
}

/// One explicit Euler step of the tank chlorine balance.
///
/// The tank volume follows the same flows, `V + (F_in − F_out)·Δt`.
pub fn step_chlorine<T: Scalar>(
    state: ChlorineState<T>,
    inflow: T,
    c_in: T,
    outflow: T,
    dt_min: T,
    params: &ChlorineParams<T>,
) -> Result<ChlorineStep<T>> {
    if !(inflow >= T::zero()) || !(outflow >= T::zero()) {
        return Err(Error::Quality(format!(
            "flows must be >= 0 (inflow {inflow}, outflow {outflow})"
        )));
    }
    let k = params.decay_per_min();
    let y = state.concentration;
    let rate = match params.mode {
        ChlorineMode::WellMixed => {
            if !(state.volume > T::zero()) {
                return Err(Error::Quality(format!(
                    "tank is empty (volume {})",
                    state.volume
                )));
            }
            inflow * (c_in - y) / state.volume - k * y
        }
        ChlorineMode::SourceTerm => inflow * c_in - k * y,
    };
    let next = y + dt_min * rate;
    let clamped = next < T::zero();
    Ok(ChlorineStep {
        state: ChlorineState {
            concentration: next.max(T::zero()),
            volume: state.volume + (inflow - outflow) * dt_min,
        },
        clamped,
    })
}

/// FIFO of `(flow GPM, concentration mg/gal)` slots, one per step of
/// detention time.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportDelay<T> {
    slots: VecDeque<(T, T)>,
    detention_min: T,
}

impl<T: Scalar> TransportDelay<T> {
    /// `detention_min` must be a whole number of steps; zero gives a
    /// pass-through line.
    pub fn new(detention_min: T, dt_min: T, fill: (T, T)) -> Result<Self> {
        if !(dt_min > T::zero()) || !(detention_min >= T::zero()) {
            return Err(Error::config(
                "quality.detention_min",
                "detention must be >= 0 and the step > 0",
            ));
        }
        let steps = detention_min / dt_min;
        let len = steps.round();
        if (steps - len).abs() > T::lit(1e-9) * steps.max(T::one()) {
            return Err(Error::config(
                "quality.detention_min",
                format!("detention {detention_min} min is not a multiple of the {dt_min} min step"),
            ));
        }
        let len = len.to_usize().expect("finite non-negative slot count");
        Ok(Self {
            slots: std::iter::repeat_n(fill, len).collect(),
            detention_min,
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn detention_min(&self) -> T {
        self.detention_min
    }

    /// Pushes the newest slot and returns the oldest one.
    pub fn push_pop(&mut self, slot: (T, T)) -> (T, T) {
        if self.slots.is_empty() {
            return slot;
        }
        let out = self.slots.pop_front().expect("non-empty");
        self.slots.push_back(slot);
        out
    }

    /// Slot returned by the `ahead`-th next [`push_pop`](Self::push_pop), if
    /// it is already in the line.
    pub fn peek(&self, ahead: usize) -> Option<(T, T)> {
        self.slots.get(ahead).copied()
    }

    pub fn slots(&self) -> impl Iterator<Item = &(T, T)> {
        self.slots.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(k: f64) -> ChlorineParams<f64> {
        ChlorineParams {
            decay_per_day: k,
            mode: ChlorineMode::WellMixed,
        }
    }

    #[test]
    fn pure_decay_matches_exponential() {
        let p = params(0.1);
        let mut s = ChlorineState {
            concentration: 22.0,
            volume: 1e6,
        };
        for _ in 0..576 {
            s = step_chlorine(s, 0.0, 0.0, 0.0, 2.5, &p).unwrap().state;
        }
        let exact = 22.0 * (-0.1f64).exp();
        assert!((s.concentration - exact).abs() / exact < 1e-3);
    }

    #[test]
    fn matching_inflow_is_decay_only() {
        let p = params(0.5);
        let mut a = ChlorineState {
            concentration: 15.0,
            volume: 2e6,
        };
        let mut b = a;
        for _ in 0..100 {
            a = step_chlorine(a, 0.0, 0.0, 0.0, 2.5, &p).unwrap().state;
            b = step_chlorine(b, 800.0, b.concentration, 800.0, 2.5, &p)
                .unwrap()
                .state;
        }
        assert!((a.concentration - b.concentration).abs() < 1e-12);
    }

    #[test]
    fn steady_state_with_sustained_feed() {
        // dy/dt = 0  =>  y = F c / (F + K V)
        let (flow, dose, volume, k) = (1000.0, 22.0, 2e6, 0.5);
        let oracle = flow * dose / (flow + k / 1440.0 * volume);
        let p = params(k);
        let mut s = ChlorineState {
            concentration: 22.0,
            volume,
        };
        for _ in 0..(30 * 576) {
            s = step_chlorine(s, flow, dose, flow, 2.5, &p).unwrap().state;
        }
        assert!((s.concentration - oracle).abs() < 1e-6 * oracle);
        assert!(s.concentration > 6.0 && s.concentration < 22.0);
    }

    #[test]
    fn empty_tank_is_an_error() {
        let s = ChlorineState {
            concentration: 1.0,
            volume: 0.0,
        };
        let err = step_chlorine(s, 1.0, 22.0, 0.0, 2.5, &params(0.5)).unwrap_err();
        assert_eq!(err.code(), "E_QUALITY");
    }

    #[test]
    fn source_term_mode_and_clamp() {
        let p = ChlorineParams {
            decay_per_day: 0.5,
            mode: ChlorineMode::SourceTerm,
        };
        let s = ChlorineState {
            concentration: 2.0,
            volume: 0.0,
        };
        let out = step_chlorine(s, 3.0, 4.0, 0.0, 1.0, &p).unwrap();
        assert!((out.state.concentration - (2.0_f64 + 12.0 - 0.5 / 1440.0 * 2.0)).abs() < 1e-12);

        // a decay rate this large overshoots and is clamped
        let p = ChlorineParams {
            decay_per_day: 2000.0,
            mode: ChlorineMode::WellMixed,
        };
        let s = ChlorineState {
            concentration: 1.0,
            volume: 10.0,
        };
        let out = step_chlorine(s, 0.0, 0.0, 0.0, 1.0, &p).unwrap();
        assert!(out.clamped);
        assert_eq!(out.state.concentration, 0.0);
        assert!(p.validate(1.0).is_err());
    }

    #[test]
    fn delay_line_lengths() {
        let mut d = TransportDelay::new(5.0, 2.5, (0.0, 22.0)).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.push_pop((1.0, 1.0)), (0.0, 22.0));
        assert_eq!(d.push_pop((2.0, 2.0)), (0.0, 22.0));
        assert_eq!(d.peek(0), Some((1.0, 1.0)));
        assert_eq!(d.push_pop((3.0, 3.0)), (1.0, 1.0));
        assert!(TransportDelay::new(4.0, 2.5, (0.0, 0.0)).is_err());
        let mut pass = TransportDelay::new(0.0, 2.5, (0.0, 0.0)).unwrap();
        assert_eq!(pass.push_pop((7.0, 1.0)), (7.0, 1.0));
    }

    #[test]
    fn step_input_emerges_after_detention() {
        let dt = 2.5;
        let mut d = TransportDelay::new(30.0, dt, (0.0, 22.0)).unwrap();
        let mut first_nonzero = None;
        for k in 0..40 {
            let (f, _) = d.push_pop((3500.0, 22.0));
            if f > 0.0 && first_nonzero.is_none() {
                first_nonzero = Some(k as f64 * dt);
            }
        }
        assert_eq!(first_nonzero, Some(30.0));
    }

    proptest! {
        #[test]
        fn fifo_conserves_volume(flows in proptest::collection::vec(0.0f64..5000.0, 1..200), len in 0usize..12) {
            let dt = 2.5;
            let mut d = TransportDelay::new(len as f64 * dt, dt, (0.0, 22.0)).unwrap();
            let (mut pushed, mut popped) = (0.0, 0.0);
            for f in &flows {
                pushed += f * dt;
                popped += d.push_pop((*f, 22.0)).0 * dt;
            }
            let held: f64 = d.slots().map(|s| s.0 * dt).sum();
            prop_assert!((pushed - popped - held).abs() <= 1e-9 * pushed.max(1.0));
        }

        #[test]
        fn concentration_stays_non_negative(
            y in 0.0f64..30.0, inflow in 0.0f64..3000.0, c_in in 0.0f64..22.0, k in 0.0f64..17.0,
        ) {
            let p = params(k);
            let mut s = ChlorineState { concentration: y, volume: 1e6 };
            let mut prev = y;
            for _ in 0..50 {
                s = step_chlorine(s, inflow, c_in, inflow, 2.5, &p).unwrap().state;
                prop_assert!(s.concentration >= 0.0);
                if inflow == 0.0 {
                    prop_assert!(s.concentration <= prev);
                }
                prev = s.concentration;
            }
        }
    }
}
