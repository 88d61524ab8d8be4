//! Grid emissions: per-source emission factors fitted by least squares and
//! the hourly intensity series derived from them.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::demand::csv_error;
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::scalar::Scalar;

pub const N_SOURCES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Wind,
    Solar,
    Hydro,
    Gas,
    Coal,
    Nuclear,
}

impl Source {
    pub const ALL: [Source; N_SOURCES] = [
        Source::Wind,
        Source::Solar,
        Source::Hydro,
        Source::Gas,
        Source::Coal,
        Source::Nuclear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Source::Wind => "wind",
            Source::Solar => "solar",
            Source::Hydro => "hydro",
            Source::Gas => "gas",
            Source::Coal => "coal",
            Source::Nuclear => "nuclear",
        }
    }
}

pub const MIX_HEADER: [&str; 8] = [
    "hour",
    "wind_mwh",
    "solar_mwh",
    "hydro_mwh",
    "gas_mwh",
    "coal_mwh",
    "nuclear_mwh",
    "ghg_kg",
];

/// One hour of generation by source and the observed greenhouse-gas total.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMixRecord<T> {
    pub hour: u32,
    /// MWh per source in [`Source::ALL`] order.
    pub production: [T; N_SOURCES],
    pub ghg_kg: T,
}

/// Emission factor per source, kg CO2 per MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionCoefficients<T> {
    pub per_source: [T; N_SOURCES],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionFit<T> {
    pub coefficients: EmissionCoefficients<T>,
    pub residual_rms: T,
    pub residuals: Vec<T>,
}

/// Least-squares fit of GHG on the six production columns, no intercept.
pub fn fit_emissions_coefficients<T: Scalar>(records: &[EnergyMixRecord<T>]) -> Result<EmissionFit<T>> {
    if records.len() < N_SOURCES {
        return Err(Error::Fit(format!(
            "need at least {N_SOURCES} records, got {}",
            records.len()
        )));
    }
    let rows: Vec<Vec<T>> = records.iter().map(|r| r.production.to_vec()).collect();
    let y: Vec<T> = records.iter().map(|r| r.ghg_kg).collect();
    let ls = least_squares(&rows, &y).map_err(|rd| {
        let mut names: Vec<&str> = rd.dependent.iter().map(|&i| Source::ALL[i].name()).collect();
        names.sort_unstable();
        Error::Fit(format!(
            "design matrix has rank {} < {N_SOURCES}; indeterminate or collinear sources: {}",
            rd.rank,
            names.join(", ")
        ))
    })?;
    let n = T::lit(records.len() as f64);
    let residual_rms = (ls.residuals.iter().map(|r| *r * *r).sum::<T>() / n).sqrt();
    let mut per_source = [T::zero(); N_SOURCES];
    per_source.copy_from_slice(&ls.coefficients);
    Ok(EmissionFit {
        coefficients: EmissionCoefficients { per_source },
        residual_rms,
        residuals: ls.residuals,
    })
}

/// Hourly grid intensity `φ`, kg CO2 per kWh.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionsIntensitySeries<T> {
    hourly: Vec<T>,
}

impl<T: Scalar> EmissionsIntensitySeries<T> {
    pub fn new(hourly: Vec<T>) -> Result<Self> {
        if hourly.is_empty() {
            return Err(Error::Series("intensity series is empty".into()));
        }
        if let Some(h) = hourly.iter().position(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(Error::Series(format!(
                "intensity at hour {h} is {} (must be finite and >= 0)",
                hourly[h]
            )));
        }
        Ok(Self { hourly })
    }

    /// Flat series of `hours` samples.
    pub fn constant(phi: T, hours: usize) -> Result<Self> {
        Self::new(vec![phi; hours.max(1)])
    }

    pub fn hourly(&self) -> &[T] {
        &self.hourly
    }

    /// Linear interpolation between hourly samples taken at the top of each
    /// hour; held constant past the last sample.
    pub fn at(&self, t_min: T) -> T {
        let pos = (t_min / T::lit(60.0)).max(T::zero());
        let i = pos.floor();
        let idx = i.to_usize().unwrap_or(usize::MAX);
        if idx + 1 >= self.hourly.len() {
            return *self.hourly.last().expect("non-empty");
        }
        let w = pos - i;
        self.hourly[idx] + (self.hourly[idx + 1] - self.hourly[idx]) * w
    }
}

/// `φ(hour) = Σ coeff·production / Σ production`, converted to kg/kWh.
pub fn intensity_series<T: Scalar>(
    coeffs: &EmissionCoefficients<T>,
    mix: &[EnergyMixRecord<T>],
    hours: usize,
) -> Result<EmissionsIntensitySeries<T>> {
    if mix.len() < hours {
        return Err(Error::Series(format!(
            "mix covers {} hours, {hours} requested",
            mix.len()
        )));
    }
    let mut hourly = Vec::with_capacity(hours);
    for rec in &mix[..hours] {
        let total: T = rec.production.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::Series(format!(
                "zero total production in hour {}",
                rec.hour
            )));
        }
        let weighted: T = rec
            .production
            .iter()
            .zip(&coeffs.per_source)
            .map(|(p, c)| *p * *c)
            .sum();
        hourly.push((weighted / total / T::lit(1000.0)).max(T::zero()));
    }
    EmissionsIntensitySeries::new(hourly)
}

/// Reads the mix CSV (`hour,wind_mwh,...,ghg_kg`).
pub fn load_mix_csv(path: &Path) -> Result<Vec<EnergyMixRecord<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(csv_error(path, e)),
    };
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::Parse {
            line: 1,
            msg: "file is empty".into(),
        });
    }
    if headers.iter().collect::<Vec<_>>() != MIX_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `{}`", MIX_HEADER.join(",")),
        });
    }
    let mut records: Vec<EnergyMixRecord<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let number = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("column `{}` is not a number", MIX_HEADER[i]),
                })
        };
        let hour = rec
            .get(0)
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| Error::Parse {
                line,
                msg: "column `hour` is not a non-negative integer".into(),
            })?;
        let mut production = [0.0; N_SOURCES];
        for (i, slot) in production.iter_mut().enumerate() {
            *slot = number(i + 1)?;
            if *slot < 0.0 {
                return Err(Error::Format(format!(
                    "line {line}: negative production in `{}`",
                    MIX_HEADER[i + 1]
                )));
            }
        }
        let ghg_kg = number(7)?;
        if let Some(prev) = records.last() {
            if hour <= prev.hour {
                return Err(Error::Format(format!(
                    "line {line}: hour {hour} does not follow hour {}",
                    prev.hour
                )));
            }
        }
        records.push(EnergyMixRecord {
            hour,
            production,
            ghg_kg,
        });
    }
    if records.is_empty() {
        return Err(Error::Parse {
            line: 2,
            msg: "no data rows".into(),
        });
    }
    Ok(records)
}

pub fn write_mix_csv<W: Write>(out: W, records: &[EnergyMixRecord<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(MIX_HEADER).map_err(io)?;
    for r in records {
        let mut row = vec![r.hour.to_string()];
        row.extend(r.production.iter().map(|v| v.to_string()));
        row.push(r.ghg_kg.to_string());
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

/// Emission factors used by [`synthetic_mix`], kg CO2 per MWh.
pub const SYNTHETIC_COEFFICIENTS: [f64; N_SOURCES] = [11.0, 45.0, 24.0, 450.0, 950.0, 12.0];

/// Deterministic regional grid with a daily load cycle, a solar bell around
/// midday, slow wind fronts, dispatchable hydro, baseload nuclear and coal,
/// and gas following the residual load.
///
/// `ghg_noise` is the relative standard deviation of multiplicative noise on
/// the GHG column.
pub fn synthetic_mix(hours: usize, seed: u64, coeffs: &[f64; N_SOURCES], ghg_noise: f64) -> Vec<EnergyMixRecord<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let tau = std::f64::consts::TAU;
    let days = hours / 24 + 1;
    let cloud: Vec<f64> = (0..days).map(|_| rng.random_range(0.55..1.0)).collect();
    let front = rng.random_range(0.0..tau);
    let mut wind_state: f64 = 0.0;

    (0..hours)
        .map(|h| {
            let hod = (h % 24) as f64;
            let load = 1000.0 * (1.0 + 0.15 * (tau * (hod - 18.0) / 24.0).cos());
            let solar = 380.0 * (std::f64::consts::PI * (hod - 6.0) / 12.0).sin().max(0.0) * cloud[h / 24];
            wind_state = 0.85 * wind_state + 0.25 * unit.sample(&mut rng);
            let wind = (140.0 * (1.0 + 0.5 * (tau * h as f64 / 37.0 + front).sin() + wind_state)).max(0.0);
            let hydro = (70.0 + 25.0 * (tau * (hod - 17.0) / 24.0).cos() + 4.0 * unit.sample(&mut rng)).max(0.0);
            let nuclear = (280.0 + 6.0 * unit.sample(&mut rng)).max(0.0);
            let coal = (180.0 + 50.0 * (tau * (hod - 19.0) / 24.0).cos() + 8.0 * unit.sample(&mut rng)).max(0.0);
            let gas = (load - solar - wind - hydro - nuclear - coal).max(20.0) + 5.0 * unit.sample(&mut rng).abs();
            let production = [wind, solar, hydro, gas, coal, nuclear];
            let clean: f64 = production.iter().zip(coeffs).map(|(p, c)| p * c).sum();
            let ghg_kg = clean * (1.0 + ghg_noise * unit.sample(&mut rng));
            EnergyMixRecord {
                hour: h as u32,
                production,
                ghg_kg,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_source_intensity() {
        let coeffs = EmissionCoefficients {
            per_source: [0.0, 0.0, 0.0, 400.0, 0.0, 0.0],
        };
        let mix: Vec<_> = (0..5)
            .map(|h| EnergyMixRecord {
                hour: h,
                production: [0.0, 0.0, 0.0, 10.0 + h as f64, 0.0, 0.0],
                ghg_kg: 0.0,
            })
            .collect();
        let s = intensity_series(&coeffs, &mix, 5).unwrap();
        assert!(s.hourly().iter().all(|v| (v - 0.4).abs() < 1e-15));
    }

    #[test]
    fn wind_coal_half_and_half() {
        let coeffs = EmissionCoefficients {
            per_source: [0.0, 0.0, 0.0, 0.0, 800.0, 0.0],
        };
        let mix = vec![EnergyMixRecord {
            hour: 0,
            production: [50.0, 0.0, 0.0, 0.0, 50.0, 0.0],
            ghg_kg: 0.0,
        }];
        let s = intensity_series(&coeffs, &mix, 1).unwrap();
        assert!((s.hourly()[0] - 0.4_f64).abs() < 1e-15);
    }

    #[test]
    fn zero_production_hour_is_an_error() {
        let coeffs = EmissionCoefficients {
            per_source: [1.0; N_SOURCES],
        };
        let mix = vec![EnergyMixRecord {
            hour: 3,
            production: [0.0; N_SOURCES],
            ghg_kg: 0.0,
        }];
        let err = intensity_series(&coeffs, &mix, 1).unwrap_err();
        assert_eq!(err.code(), "E_SERIES");
        assert!(intensity_series(&coeffs, &mix, 2).is_err());
    }

    #[test]
    fn only_gas_is_rank_deficient() {
        let records: Vec<_> = (0..24)
            .map(|h| EnergyMixRecord {
                hour: h,
                production: [0.0, 0.0, 0.0, 100.0 + h as f64, 0.0, 0.0],
                ghg_kg: 450.0 * (100.0 + h as f64),
            })
            .collect();
        let err = fit_emissions_coefficients(&records).unwrap_err();
        let msg = err.to_string();
        for name in ["wind", "solar", "hydro", "coal", "nuclear"] {
            assert!(msg.contains(name), "{msg}");
        }
        assert!(!msg.contains("gas"), "{msg}");
    }

    #[test]
    fn interpolation_between_hours() {
        let s = EmissionsIntensitySeries::new(vec![0.2, 0.4, 0.3]).unwrap();
        assert_eq!(s.at(0.0), 0.2);
        assert!((s.at(30.0) - 0.3_f64).abs() < 1e-15);
        assert_eq!(s.at(120.0), 0.3);
        assert_eq!(s.at(500.0), 0.3);
        assert!(EmissionsIntensitySeries::new(vec![0.1, -0.1]).is_err());
    }

    #[test]
    fn synthetic_mix_is_seeded() {
        let a = synthetic_mix(48, 3, &SYNTHETIC_COEFFICIENTS, 0.01);
        let b = synthetic_mix(48, 3, &SYNTHETIC_COEFFICIENTS, 0.01);
        let c = synthetic_mix(48, 4, &SYNTHETIC_COEFFICIENTS, 0.01);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|r| r.production.iter().all(|p| *p >= 0.0)));
    }
}
