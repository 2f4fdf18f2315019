//! The time axis: sliding-window re-estimation, interpolation between
//! epochs, quantized tile storage and storage-cost arithmetic.

pub mod tiles;

pub use tiles::{dequantize_tiles, quantize_tiles, QuantizedTile, TileKey, TileStore, TileUpdate, Tiling};

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::estimate::{estimate_map, MethodConfig};
use crate::field::{ceil_ratio, BandGrid, BandLayout, Grid2D, Unit};
use crate::sensing::{Measurement, MeasurementFlags, MeasurementSet, Sensor};

/// One committed epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub time_index: u64,
    pub measurements: MeasurementSet,
    /// Estimate in dB.
    pub estimate: BandGrid,
}

/// Radio map maintained over time.
///
/// The window holds the last `window_length` epochs used for re-estimation;
/// estimates of epochs that left the window stay available for time
/// interpolation.
#[derive(Debug, Clone)]
pub struct MapSeries {
    layout: BandLayout,
    window_length: usize,
    window: VecDeque<Epoch>,
    history: BTreeMap<u64, BandGrid>,
}

/// Recency weight of an epoch `age` steps behind the newest.
pub fn recency_weight(age: usize) -> f64 {
    1.0 / (1.0 + age as f64)
}

impl MapSeries {
    pub fn new(layout: BandLayout, window_length: usize) -> Result<Self> {
        if window_length == 0 {
            return Err(Error::InvalidInput("window_length must be at least 1".into()));
        }
        layout.geometry.validate()?;
        Ok(MapSeries {
            layout,
            window_length,
            window: VecDeque::new(),
            history: BTreeMap::new(),
        })
    }

    pub fn layout(&self) -> &BandLayout {
        &self.layout
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    /// Epochs currently in the window, oldest first.
    pub fn window(&self) -> impl Iterator<Item = &Epoch> {
        self.window.iter()
    }

    /// Times of every estimate ever committed.
    pub fn times(&self) -> Vec<u64> {
        self.history.keys().copied().collect()
    }

    pub fn estimate_at(&self, time_index: u64) -> Option<&BandGrid> {
        self.history.get(&time_index)
    }

    pub fn latest(&self) -> Option<&Epoch> {
        self.window.back()
    }

    /// Appends a single-time measurement set, evicts epochs beyond the
    /// window and estimates the new map from the window's measurements.
    pub fn window_update(&mut self, epoch: MeasurementSet, config: &MethodConfig) -> Result<&Epoch> {
        epoch.geometry().ensure_same(&self.layout.geometry)?;
        let times = epoch.times();
        let [t] = times[..] else {
            return Err(Error::InvalidInput(format!(
                "an epoch must carry exactly one time index, got {}",
                times.len()
            )));
        };
        if let Some(&last) = self.history.keys().next_back() {
            if t <= last {
                return Err(Error::InvalidInput(format!("time index {t} is not after {last}")));
            }
        }
        let mut members: Vec<&MeasurementSet> = self
            .window
            .iter()
            .rev()
            .take(self.window_length - 1)
            .map(|e| &e.measurements)
            .collect();
        members.insert(0, &epoch);
        let combined = combine_window(&members, t)?;
        let estimate = estimate_map(&combined, config, &self.layout)?;

        self.window.push_back(Epoch {
            time_index: t,
            measurements: epoch,
            estimate: estimate.clone(),
        });
        while self.window.len() > self.window_length {
            self.window.pop_front();
        }
        self.history.insert(t, estimate);
        Ok(self.window.back().expect("just pushed"))
    }

    /// Cell-wise dB interpolation between the two epochs bracketing `t`,
    /// weighted inversely to the time difference.
    pub fn interpolate_time(&self, t: f64) -> Result<BandGrid> {
        let (first, last) = match (self.history.keys().next(), self.history.keys().next_back()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(Error::EmptyMeasurements("series has no epochs".into())),
        };
        if !(t >= first as f64 && t <= last as f64) {
            return Err(Error::InvalidInput(format!("time {t} outside [{first}, {last}]")));
        }
        let below = self.history.range(..=t.floor() as u64).next_back().expect("t ≥ first");
        if *below.0 as f64 == t {
            return Ok(below.1.clone());
        }
        let above = self.history.range(t.ceil() as u64..).next().expect("t ≤ last");
        if *above.0 as f64 == t {
            return Ok(above.1.clone());
        }
        let (t0, a) = (*below.0 as f64, below.1);
        let (t1, b) = (*above.0 as f64, above.1);
        // 1/|t − t0| : 1/|t − t1|, normalised
        let w1 = (t - t0) / (t1 - t0);
        let w0 = 1.0 - w1;
        let grids = a
            .grids()
            .iter()
            .zip(b.grids())
            .map(|(ga, gb)| {
                let values = ga
                    .values()
                    .iter()
                    .zip(gb.values())
                    .map(|(&x, &y)| (w0 * x + w1 * y).clamp(x.min(y), x.max(y)))
                    .collect();
                Grid2D::new(*ga.geometry(), values, Unit::Db)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(a.with_grids(grids))
    }
}

/// Collapses the window (newest first) into one measurement set: every
/// sensor/channel pair gets the recency-weighted mean of its unrejected
/// values. A pair seen only once keeps its value bit-for-bit, and ordering
/// follows first appearance, so a one-epoch window reproduces its input.
fn combine_window(members: &[&MeasurementSet], time_index: u64) -> Result<MeasurementSet> {
    // sensor identity: id plus position, so moving crowd sensors stay distinct
    type SensorKey = (u32, u64, u64);
    let mut sensor_ids: HashMap<SensorKey, u32> = HashMap::new();
    let mut sensors: Vec<Sensor> = Vec::new();
    let mut order: Vec<(u32, usize)> = Vec::new();
    let mut acc: HashMap<(u32, usize), Vec<(f64, f64)>> = HashMap::new();
    let mut next_id = members.iter().flat_map(|m| m.sensors()).map(|s| s.id).max().unwrap_or(0);

    for (age, ms) in members.iter().enumerate() {
        let w = recency_weight(age);
        for m in ms.measurements().iter().filter(|m| !m.flags.rejected) {
            let s = ms.sensor(m.sensor_id).expect("validated set");
            let skey = (s.id, s.x.to_bits(), s.y.to_bits());
            let id = *sensor_ids.entry(skey).or_insert_with(|| {
                // fresh ids start above every original one
                let id = if sensors.iter().any(|o| o.id == s.id) {
                    next_id += 1;
                    next_id
                } else {
                    s.id
                };
                sensors.push(Sensor { id, ..*s });
                id
            });
            let key = (id, m.channel);
            let entry = acc.entry(key).or_default();
            if entry.is_empty() {
                order.push(key);
            }
            entry.push((w, m.psd_db));
        }
    }
    let measurements = order
        .into_iter()
        .map(|key| {
            let vals = &acc[&key];
            let psd_db = if let [(_, v)] = vals[..] {
                v
            } else {
                let total: f64 = vals.iter().map(|p| p.0).sum();
                vals.iter().map(|(w, v)| (w / total) * v).sum()
            };
            Measurement {
                sensor_id: key.0,
                channel: key.1,
                time_index,
                psd_db,
                flags: MeasurementFlags::default(),
            }
        })
        .collect();
    // sensors that only reported rejected values are dropped with them
    MeasurementSet::new(sensors, measurements, *members[0].geometry())
}

/// Bits needed to store a map series at the given resolution:
/// channels × cells × time steps × bits per cell, rounding every division up.
#[allow(clippy::too_many_arguments)]
pub fn storage_size_bits(
    width_km: f64,
    height_km: f64,
    cell_m: f64,
    band_mhz: f64,
    channel_mhz: f64,
    duration_h: f64,
    step_min: f64,
    bits_per_px: u32,
) -> Result<u128> {
    let args = [width_km, height_km, cell_m, band_mhz, channel_mhz, duration_h, step_min];
    if args.iter().any(|a| !(a.is_finite() && *a > 0.0)) || bits_per_px == 0 {
        return Err(Error::InvalidInput("storage arguments must be positive".into()));
    }
    let channels = ceil_ratio(band_mhz, channel_mhz) as u128;
    let cols = ceil_ratio(width_km * 1000.0, cell_m) as u128;
    let rows = ceil_ratio(height_km * 1000.0, cell_m) as u128;
    let steps = ceil_ratio(duration_h * 60.0, step_min) as u128;
    Ok(channels * rows * cols * steps * bits_per_px as u128)
}
