//! Time-varying inputs: distribution demand and grid emissions intensity.

mod demand;
mod emissions;

pub use demand::{load_demand_csv, DemandNoise, DemandProfile, MIN_PER_DAY};
pub use emissions::{
    fit_emissions_coefficients, intensity_series, load_mix_csv, synthetic_mix, write_mix_csv,
    EmissionCoefficients, EmissionFit, EmissionsIntensitySeries, EnergyMixRecord, Source,
    MIX_HEADER, N_SOURCES, SYNTHETIC_COEFFICIENTS,
};
