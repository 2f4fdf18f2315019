//! Grid-sweep driver: fit one estimator per channel, evaluate every cell.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::idw::{estimate_idw, estimate_midw};
use super::kriging::KrigingModel;
use super::multi::fit_model_based;
use super::pathloss::PathLossFit;
use super::rbf::{RbfKind, RbfModel};
use super::variogram::{fit_variogram, Variogram};
use crate::error::{Error, Result};
use crate::field::{db_to_watts, watts_to_db, BandGrid, BandLayout, Geometry, Grid2D, Unit};
use crate::sensing::{MeasurementSet, Sample};

pub const DEFAULT_D_EXP: f64 = 2.0;
pub const DEFAULT_VARIOGRAM_BINS: usize = 12;

fn default_d_exp() -> f64 {
    DEFAULT_D_EXP
}

/// Estimator selection and hyperparameters, as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    Idw {
        #[serde(default = "default_d_exp")]
        d_exp: f64,
    },
    Midw {
        #[serde(default = "default_d_exp")]
        d_exp: f64,
    },
    Rbf {
        kind: RbfKind,
        shape: f64,
        #[serde(default)]
        ridge: f64,
    },
    /// Variogram fitted from the data unless all of `nugget`, `sill` and
    /// `range` are given. `max_lag` defaults to half the area diameter.
    Kriging {
        #[serde(default)]
        n_bins: Option<usize>,
        #[serde(default)]
        max_lag: Option<f64>,
        #[serde(default)]
        nugget: Option<f64>,
        #[serde(default)]
        sill: Option<f64>,
        #[serde(default)]
        range: Option<f64>,
    },
    ModelBased {
        n_tx: usize,
    },
}

impl MethodConfig {
    /// Short tag used in file names and reports.
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Idw { .. } => "idw",
            MethodConfig::Midw { .. } => "midw",
            MethodConfig::Rbf { .. } => "rbf",
            MethodConfig::Kriging { .. } => "kriging",
            MethodConfig::ModelBased { .. } => "model_based",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        match *self {
            MethodConfig::Idw { d_exp } | MethodConfig::Midw { d_exp } if !(d_exp > 0.0) => {
                bad(format!("d_exp must be positive, got {d_exp}"))
            }
            MethodConfig::Rbf { shape, ridge, .. } if !(shape > 0.0) || !(ridge >= 0.0) => {
                bad(format!("rbf needs shape > 0 and ridge >= 0, got {shape}, {ridge}"))
            }
            MethodConfig::Kriging { n_bins, max_lag, nugget, sill, range } => {
                if n_bins.is_some_and(|n| n < 4) {
                    return bad("kriging n_bins must be at least 4".into());
                }
                if max_lag.is_some_and(|m| !(m > 0.0)) {
                    return bad("kriging max_lag must be positive".into());
                }
                match (nugget, sill, range) {
                    (None, None, None) => Ok(()),
                    (Some(n), Some(s), Some(r)) => Variogram::exponential(n, s, r).map(|_| ()),
                    _ => bad("kriging nugget, sill and range must be given together".into()),
                }
            }
            MethodConfig::ModelBased { n_tx: 0 } => bad("model_based n_tx must be at least 1".into()),
            _ => Ok(()),
        }
    }
}

/// An estimator trained on one channel's samples. Immutable once fitted and
/// safe to query from many threads.
#[derive(Debug, Clone)]
pub enum FittedEstimator {
    Idw { samples: Vec<Sample>, d_exp: f64 },
    Midw { samples: Vec<Sample>, d_exp: f64 },
    Rbf(RbfModel),
    Kriging(KrigingModel),
    ModelBased { fits: Vec<PathLossFit>, d_min: f64 },
}

impl FittedEstimator {
    pub fn fit(samples: &[Sample], config: &MethodConfig, geometry: &Geometry) -> Result<Self> {
        config.validate()?;
        if samples.is_empty() {
            return Err(Error::EmptyMeasurements("no unrejected measurements on the channel".into()));
        }
        Ok(match *config {
            MethodConfig::Idw { d_exp } => FittedEstimator::Idw { samples: samples.to_vec(), d_exp },
            MethodConfig::Midw { d_exp } => FittedEstimator::Midw { samples: samples.to_vec(), d_exp },
            MethodConfig::Rbf { kind, shape, ridge } => FittedEstimator::Rbf(RbfModel::fit(samples, kind, shape, ridge)?),
            MethodConfig::Kriging { n_bins, max_lag, nugget, sill, range } => {
                let v = match (nugget, sill, range) {
                    (Some(n), Some(s), Some(r)) => Variogram::exponential(n, s, r)?,
                    _ => fit_variogram(
                        samples,
                        n_bins.unwrap_or(DEFAULT_VARIOGRAM_BINS),
                        max_lag.unwrap_or(geometry.diameter() / 2.0),
                    )?,
                };
                FittedEstimator::Kriging(KrigingModel::fit(samples, &v)?)
            }
            MethodConfig::ModelBased { n_tx } => FittedEstimator::ModelBased {
                fits: fit_model_based(samples, n_tx, geometry)?,
                d_min: geometry.cell_size / 2.0,
            },
        })
    }

    pub fn method(&self) -> &'static str {
        match self {
            FittedEstimator::Idw { .. } => "idw",
            FittedEstimator::Midw { .. } => "midw",
            FittedEstimator::Rbf(_) => "rbf",
            FittedEstimator::Kriging(_) => "kriging",
            FittedEstimator::ModelBased { .. } => "model_based",
        }
    }

    /// Estimated level in dB at `(x, y)`.
    pub fn predict(&self, x: f64, y: f64) -> Result<f64> {
        match self {
            FittedEstimator::Idw { samples, d_exp } => estimate_idw(samples, x, y, *d_exp),
            FittedEstimator::Midw { samples, d_exp } => estimate_midw(samples, x, y, *d_exp),
            FittedEstimator::Rbf(m) => Ok(m.predict(x, y)),
            FittedEstimator::Kriging(m) => m.predict(x, y).map(|p| p.mean),
            FittedEstimator::ModelBased { fits, d_min } => {
                Ok(watts_to_db(fits.iter().map(|f| db_to_watts(f.predict_db(x, y, *d_min))).sum()))
            }
        }
    }

    pub fn pathloss_fits(&self) -> Option<&[PathLossFit]> {
        match self {
            FittedEstimator::ModelBased { fits, .. } => Some(fits),
            _ => None,
        }
    }

    pub fn variogram(&self) -> Option<&Variogram> {
        match self {
            FittedEstimator::Kriging(m) => Some(m.variogram()),
            _ => None,
        }
    }

    /// Evaluates every cell center of `geometry` in parallel.
    pub fn predict_grid(&self, geometry: &Geometry) -> Result<Grid2D> {
        let values = (0..geometry.n_cells())
            .into_par_iter()
            .map(|i| {
                let (x, y) = geometry.cell_center(i / geometry.n_cols, i % geometry.n_cols);
                self.predict(x, y)
            })
            .collect::<Result<Vec<f64>>>()?;
        Grid2D::new(*geometry, values, Unit::Db)
    }
}

/// Samples used for `channel`: its most recent time index.
pub fn channel_samples(ms: &MeasurementSet, channel: usize) -> Vec<Sample> {
    let latest = ms
        .measurements()
        .iter()
        .filter(|m| m.channel == channel && !m.flags.rejected)
        .map(|m| m.time_index)
        .max();
    match latest {
        Some(t) => ms.samples(channel, Some(t)),
        None => Vec::new(),
    }
}

/// Dense dB map for every channel of `layout`, plus the per-channel fitted
/// estimators.
pub fn estimate_map_with_fits(
    ms: &MeasurementSet,
    config: &MethodConfig,
    layout: &BandLayout,
) -> Result<(BandGrid, Vec<FittedEstimator>)> {
    config.validate()?;
    ms.geometry().ensure_same(&layout.geometry)?;
    let mut grids = Vec::with_capacity(layout.n_channels());
    let mut fitted = Vec::with_capacity(layout.n_channels());
    for k in 0..layout.n_channels() {
        let samples = channel_samples(ms, k);
        if samples.is_empty() {
            return Err(Error::EmptyMeasurements(format!("no unrejected measurements on channel {k}")));
        }
        let est = FittedEstimator::fit(&samples, config, &layout.geometry)?;
        grids.push(est.predict_grid(&layout.geometry)?);
        fitted.push(est);
    }
    let map = BandGrid::new(grids, layout.channel_centers.clone(), layout.channel_width)?;
    Ok((map, fitted))
}

pub fn estimate_map(ms: &MeasurementSet, config: &MethodConfig, layout: &BandLayout) -> Result<BandGrid> {
    estimate_map_with_fits(ms, config, layout).map(|(m, _)| m)
}

/// Model-based reconstruction of one channel: fitted transmitters and the
/// single-channel superposition map in dB.
pub fn estimate_model_based_multi(
    ms: &MeasurementSet,
    channel: usize,
    n_tx: usize,
    layout: &BandLayout,
) -> Result<(Vec<PathLossFit>, BandGrid)> {
    if channel >= layout.n_channels() {
        return Err(Error::InvalidInput(format!("channel {channel} outside layout")));
    }
    let samples = channel_samples(ms, channel);
    let est = FittedEstimator::fit(&samples, &MethodConfig::ModelBased { n_tx }, &layout.geometry)?;
    let grid = est.predict_grid(&layout.geometry)?;
    let fits = est.pathloss_fits().unwrap_or_default().to_vec();
    Ok((fits, BandGrid::single(grid, layout.channel_centers[channel], layout.channel_width)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::kriging::estimate_kriging;
    use crate::sensing::{Measurement, MeasurementFlags, Sensor, SensorKind};

    fn layout(n_channels: usize) -> BandLayout {
        BandLayout {
            geometry: Geometry::new(0.0, 0.0, 100.0, 20, 20).unwrap(),
            channel_centers: (0..n_channels).map(|k| 100e6 + k as f64 * 3e6).collect(),
            channel_width: 3e6,
        }
    }

    fn set(values: &[(f64, f64, f64)], n_channels: usize) -> MeasurementSet {
        let sensors: Vec<Sensor> = values
            .iter()
            .enumerate()
            .map(|(i, &(x, y, _))| Sensor { id: i as u32, x, y, kind: SensorKind::Dedicated })
            .collect();
        let mut ms = Vec::new();
        for k in 0..n_channels {
            for (i, &(_, _, v)) in values.iter().enumerate() {
                ms.push(Measurement {
                    sensor_id: i as u32,
                    channel: k,
                    time_index: 0,
                    psd_db: v - k as f64,
                    flags: MeasurementFlags::default(),
                });
            }
        }
        MeasurementSet::new(sensors, ms, layout(1).geometry).unwrap()
    }

    fn scattered(n: usize) -> Vec<(f64, f64, f64)> {
        (0..n)
            .map(|i| {
                let x = 50.0 + (i as f64 * 731.0) % 1900.0;
                let y = 50.0 + (i as f64 * 1237.0) % 1900.0;
                (x, y, -70.0 + 5.0 * (x / 400.0).sin() + 3.0 * (y / 300.0).cos())
            })
            .collect()
    }

    #[test]
    fn idw_single_measurement_is_constant() {
        let ms = set(&[(500.0, 700.0, -63.5)], 1);
        let m = estimate_map(&ms, &MethodConfig::Idw { d_exp: 2.0 }, &layout(1)).unwrap();
        assert!(m.channel(0).values().iter().all(|&v| v == -63.5));
        assert_eq!(m.unit(), Unit::Db);
    }

    #[test]
    fn kriging_map_equals_pointwise() {
        let data = scattered(40);
        let ms = set(&data, 1);
        let cfg = MethodConfig::Kriging { n_bins: None, max_lag: None, nugget: None, sill: None, range: None };
        let (m, fits) = estimate_map_with_fits(&ms, &cfg, &layout(1)).unwrap();
        let v = fits[0].variogram().unwrap().clone();
        let samples = ms.samples(0, None);
        let g = layout(1).geometry;
        for (r, c) in [(0, 0), (7, 13), (19, 19), (10, 2)] {
            let (x, y) = g.cell_center(r, c);
            assert_eq!(m.channel(0).get(r, c), estimate_kriging(&samples, x, y, &v).unwrap().mean);
        }
    }

    #[test]
    fn every_channel_estimated() {
        let ms = set(&scattered(30), 3);
        let m = estimate_map(&ms, &MethodConfig::Midw { d_exp: 2.0 }, &layout(3)).unwrap();
        assert_eq!(m.n_channels(), 3);
        let d = m.channel(0).get(4, 4) - m.channel(2).get(4, 4);
        assert!((d - 2.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_across_runs() {
        let ms = set(&scattered(30), 1);
        let cfg = MethodConfig::Rbf { kind: RbfKind::ThinPlate, shape: 500.0, ridge: 0.0 };
        let a = estimate_map(&ms, &cfg, &layout(1)).unwrap();
        let b = estimate_map(&ms, &cfg, &layout(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_channel_is_reported() {
        let ms = set(&scattered(10), 1);
        let e = estimate_map(&ms, &MethodConfig::Idw { d_exp: 2.0 }, &layout(2)).unwrap_err();
        assert!(matches!(e, Error::EmptyMeasurements(_)));
    }

    #[test]
    fn config_parses_from_toml() {
        let c: MethodConfig = toml::from_str("method = \"rbf\"\nkind = \"thin_plate\"\nshape = 250.0").unwrap();
        assert_eq!(c, MethodConfig::Rbf { kind: RbfKind::ThinPlate, shape: 250.0, ridge: 0.0 });
        let c: MethodConfig = toml::from_str("method = \"idw\"").unwrap();
        assert_eq!(c, MethodConfig::Idw { d_exp: 2.0 });
        assert!(toml::from_str::<MethodConfig>("method = \"idw\"\nbogus = 1").is_err());
        let partial = MethodConfig::Kriging { n_bins: None, max_lag: None, nugget: Some(0.0), sill: None, range: None };
        assert!(partial.validate().is_err());
    }
}
