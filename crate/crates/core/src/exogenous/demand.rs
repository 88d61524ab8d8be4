use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MIN_PER_DAY: f64 = 1440.0;

/// Seeded, piecewise-linear multiplicative noise on top of the daily cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandNoise {
    /// Standard deviation as a fraction of the mean flow.
    pub amplitude: f64,
    pub seed: u64,
    /// Spacing of the independent noise knots, minutes.
    pub interval_min: f64,
}

impl DemandNoise {
    fn knot(&self, index: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        StandardNormal.sample(&mut rng)
    }

    fn at(&self, t_min: f64) -> f64 {
        let pos = t_min / self.interval_min;
        let i = pos.floor();
        let frac = pos - i;
        let i = i as u64;
        let (a, b) = (self.knot(i), self.knot(i + 1));
        a + (b - a) * frac
    }
}

/// Distribution demand `F_D(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DemandProfile<T> {
    /// `mean · (1 + amplitude · cos(2π (t − peak) / 1440))` plus optional noise.
    Cyclic {
        mean_gpm: T,
        amplitude: T,
        peak_hour: T,
        noise: Option<DemandNoise>,
    },
    /// Linear interpolation through `(minute, gpm)` samples.
    Table(Vec<(T, T)>),
}

impl<T: Scalar> DemandProfile<T> {
    pub fn cyclic(mean_gpm: T, amplitude: T, peak_hour: T) -> Self {
        DemandProfile::Cyclic {
            mean_gpm,
            amplitude,
            peak_hour,
            noise: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DemandProfile::Cyclic {
                mean_gpm,
                amplitude,
                noise,
                ..
            } => {
                if !(*mean_gpm >= T::zero()) {
                    return Err(Error::config("demand.mean_gpm", "must be >= 0"));
                }
                if !(*amplitude >= T::zero()) {
                    return Err(Error::config("demand.amplitude", "must be >= 0"));
                }
                if let Some(n) = noise {
                    if !(n.amplitude >= 0.0) || !(n.interval_min > 0.0) {
                        return Err(Error::config(
                            "demand.noise",
                            "amplitude must be >= 0 and interval > 0",
                        ));
                    }
                }
                Ok(())
            }
            DemandProfile::Table(rows) => {
                if rows.is_empty() {
                    return Err(Error::config("demand.table", "table is empty"));
                }
                if rows.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::Format("demand table minutes must increase".into()));
                }
                if rows.iter().any(|r| !(r.1 >= T::zero())) {
                    return Err(Error::Format("demand table flows must be >= 0".into()));
                }
                Ok(())
            }
        }
    }

    /// Demand in GPM at `t_min` minutes after the scenario start.
    pub fn demand_at(&self, t_min: T) -> Result<T> {
        if !(t_min >= T::zero()) {
            return Err(Error::Range(format!("demand requested at negative time {t_min}")));
        }
        match self {
            DemandProfile::Cyclic {
                mean_gpm,
                amplitude,
                peak_hour,
                noise,
            } => {
                let day = T::lit(MIN_PER_DAY);
                // reduce first so the deterministic part repeats bit-for-bit
                let phase = T::lit(2.0) * T::PI() * (t_min % day - *peak_hour * T::lit(60.0)) / day;
                let mut f = *mean_gpm * (T::one() + *amplitude * phase.cos());
                if let Some(n) = noise {
                    f = f + *mean_gpm * T::lit(n.amplitude * n.at(t_min.as_f64()));
                }
                Ok(f.max(T::zero()))
            }
            DemandProfile::Table(rows) => {
                let first = rows.first().expect("validated non-empty");
                let last = rows.last().expect("validated non-empty");
                if t_min < first.0 || t_min > last.0 {
                    return Err(Error::Range(format!(
                        "t = {t_min} min is outside the demand table [{}, {}]",
                        first.0, last.0
                    )));
                }
                let i = rows.partition_point(|r| r.0 <= t_min);
                if i == rows.len() {
                    return Ok(last.1);
                }
                let (a, b) = (rows[i - 1], rows[i]);
                let w = (t_min - a.0) / (b.0 - a.0);
                Ok((a.1 + (b.1 - a.1) * w).max(T::zero()))
            }
        }
    }
}

/// Reads a `minute,gpm` demand table.
pub fn load_demand_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["minute", "gpm"] {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `minute,gpm`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("column {} is not a number", i + 1),
                })
        };
        rows.push((field(0)?, field(1)?));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "demand table has no rows".into(),
        });
    }
    let table = DemandProfile::Table(rows.clone());
    table.validate()?;
    Ok(rows)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            line,
            msg: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MEAN: f64 = 5_000_000.0 / 1440.0;

    #[test]
    fn flat_profile_is_daily_volume_over_minutes() {
        let p = DemandProfile::cyclic(MEAN, 0.0, 18.0);
        assert!((p.demand_at(123.0).unwrap() - 3472.2222).abs() < 1e-3);
    }

    #[test]
    fn peak_at_phase() {
        let p = DemandProfile::cyclic(MEAN, 0.3, 18.0);
        let peak = p.demand_at(18.0 * 60.0).unwrap();
        assert!((peak - 1.3 * MEAN).abs() < 1e-9);
    }

    #[test]
    fn daily_integral_is_five_million_gallons() {
        for amp in [0.0, 0.3, 0.9] {
            let p = DemandProfile::cyclic(MEAN, amp, 18.0);
            let dt = 2.5;
            let total: f64 = (0..576).map(|k| p.demand_at(k as f64 * dt).unwrap() * dt).sum();
            assert!((total - 5e6).abs() / 5e6 < 1e-3, "{amp}: {total}");
        }
    }

    #[test]
    fn noise_is_deterministic_and_clamped() {
        let p = DemandProfile::Cyclic {
            mean_gpm: MEAN,
            amplitude: 0.3,
            peak_hour: 18.0,
            noise: Some(DemandNoise {
                amplitude: 0.05,
                seed: 7,
                interval_min: 60.0,
            }),
        };
        let a: Vec<f64> = (0..100).map(|k| p.demand_at(k as f64 * 17.0).unwrap()).collect();
        let b: Vec<f64> = (0..100).map(|k| p.demand_at(k as f64 * 17.0).unwrap()).collect();
        assert_eq!(a, b);
        assert!(a.iter().any(|v| (v - MEAN).abs() > 1.0));

        let wild = DemandProfile::Cyclic {
            mean_gpm: 100.0,
            amplitude: 0.0,
            peak_hour: 0.0,
            noise: Some(DemandNoise {
                amplitude: 10.0,
                seed: 1,
                interval_min: 1.0,
            }),
        };
        assert!((0..500).all(|k| wild.demand_at(k as f64 * 0.3).unwrap() >= 0.0));
    }

    #[test]
    fn table_interpolates_and_rejects_out_of_range() {
        let p = DemandProfile::Table(vec![(0.0, 100.0), (10.0, 200.0)]);
        assert_eq!(p.demand_at(5.0).unwrap(), 150.0);
        assert_eq!(p.demand_at(10.0).unwrap(), 200.0);
        let err = p.demand_at(10.5).unwrap_err();
        assert_eq!(err.code(), "E_RANGE");
    }

    #[test]
    fn periodic_over_a_day() {
        let p = DemandProfile::cyclic(MEAN, 0.3, 18.0);
        for k in 0..200 {
            let t = k as f64 * 7.5;
            assert_eq!(p.demand_at(t).unwrap(), p.demand_at(t + 1440.0).unwrap());
        }
    }
}
