use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CONTROL_DIM: usize = 5;

/// Position of each actuator in the control vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlIndex {
    /// Booster pump pressure, PSI.
    Booster = 0,
    /// Tank 1 inlet pump flow, GPM.
    InletPump1 = 1,
    /// Tank 2 inlet pump flow, GPM.
    InletPump2 = 2,
    /// Tank 1 outlet valve conductance, GPM/PSI.
    Valve1 = 3,
    /// Tank 2 outlet valve conductance, GPM/PSI.
    Valve2 = 4,
}

impl ControlIndex {
    pub const ALL: [ControlIndex; CONTROL_DIM] = [
        ControlIndex::Booster,
        ControlIndex::InletPump1,
        ControlIndex::InletPump2,
        ControlIndex::Valve1,
        ControlIndex::Valve2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControlIndex::Booster => "booster_psi",
            ControlIndex::InletPump1 => "inlet1_gpm",
            ControlIndex::InletPump2 => "inlet2_gpm",
            ControlIndex::Valve1 => "valve1_gpm_per_psi",
            ControlIndex::Valve2 => "valve2_gpm_per_psi",
        }
    }

    pub fn inlet_pump(tank: usize) -> Self {
        [ControlIndex::InletPump1, ControlIndex::InletPump2][tank]
    }

    pub fn valve(tank: usize) -> Self {
        [ControlIndex::Valve1, ControlIndex::Valve2][tank]
    }
}

/// `u(k)`: booster pressure, two inlet pump flows, two outlet valve conductances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlVector<T> {
    pub values: [T; CONTROL_DIM],
}

impl<T: Scalar> ControlVector<T> {
    pub fn new(booster: T, inlet1: T, inlet2: T, valve1: T, valve2: T) -> Self {
        Self {
            values: [booster, inlet1, inlet2, valve1, valve2],
        }
    }

    pub fn zeros() -> Self {
        Self {
            values: [T::zero(); CONTROL_DIM],
        }
    }

    #[inline]
    pub fn get(&self, idx: ControlIndex) -> T {
        self.values[idx as usize]
    }

    #[inline]
    pub fn set(&mut self, idx: ControlIndex, v: T) {
        self.values[idx as usize] = v;
    }

    pub fn booster(&self) -> T {
        self.get(ControlIndex::Booster)
    }
}

/// Per-dimension `[lower, upper]` box for the control vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBounds<T> {
    pub lower: [T; CONTROL_DIM],
    pub upper: [T; CONTROL_DIM],
}

impl<T: Scalar> ControlBounds<T> {
    pub fn new(lower: [T; CONTROL_DIM], upper: [T; CONTROL_DIM]) -> Result<Self> {
        for idx in ControlIndex::ALL {
            let (lo, hi) = (lower[idx as usize], upper[idx as usize]);
            if !(lo >= T::zero()) || !(hi >= lo) || !hi.is_finite() {
                return Err(Error::config(
                    format!("bounds.{}", idx.name()),
                    format!("need 0 <= lower <= upper, got [{lo}, {hi}]"),
                ));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn clamp(&self, u: &ControlVector<T>) -> ControlVector<T> {
        let mut out = *u;
        for i in 0..CONTROL_DIM {
            out.values[i] = u.values[i].max(self.lower[i]).min(self.upper[i]);
        }
        out
    }

    pub fn contains(&self, u: &ControlVector<T>) -> bool {
        (0..CONTROL_DIM).all(|i| u.values[i] >= self.lower[i] && u.values[i] <= self.upper[i])
    }
}
