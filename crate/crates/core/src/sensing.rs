//! Sensor placement, synthetic measurements, quantization and bad-data
//! rejection.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BandGrid, Geometry};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Dedicated,
    Crowd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub kind: SensorKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementFlags {
    pub quantized: bool,
    pub rejected: bool,
}

impl MeasurementFlags {
    fn token(&self) -> &'static str {
        match (self.quantized, self.rejected) {
            (false, false) => "none",
            (true, false) => "quantized",
            (false, true) => "rejected",
            (true, true) => "quantized|rejected",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        let mut f = MeasurementFlags::default();
        for tok in s.split('|').map(str::trim).filter(|t| !t.is_empty()) {
            match tok {
                "none" => {}
                "quantized" => f.quantized = true,
                "rejected" => f.rejected = true,
                other => return Err(Error::InvalidInput(format!("unknown flag {other:?}"))),
            }
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub sensor_id: u32,
    pub channel: usize,
    pub time_index: u64,
    pub psd_db: f64,
    pub flags: MeasurementFlags,
}

/// A located scalar observation, the input of every spatial estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    sensors: Vec<Sensor>,
    measurements: Vec<Measurement>,
    geometry: Geometry,
}

impl MeasurementSet {
    pub fn new(sensors: Vec<Sensor>, measurements: Vec<Measurement>, geometry: Geometry) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for s in &sensors {
            if !ids.insert(s.id) {
                return Err(Error::InvalidInput(format!("duplicate sensor id {}", s.id)));
            }
            if !geometry.contains(s.x, s.y) {
                return Err(Error::InvalidInput(format!(
                    "sensor {} at ({}, {}) lies outside the area",
                    s.id, s.x, s.y
                )));
            }
        }
        let mut keys = BTreeSet::new();
        for m in &measurements {
            if !ids.contains(&m.sensor_id) {
                return Err(Error::InvalidInput(format!(
                    "measurement references unknown sensor {}",
                    m.sensor_id
                )));
            }
            if !keys.insert((m.sensor_id, m.channel, m.time_index)) {
                return Err(Error::InvalidInput(format!(
                    "duplicate measurement for sensor {} channel {} time {}",
                    m.sensor_id, m.channel, m.time_index
                )));
            }
            if !m.flags.rejected && !m.psd_db.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite PSD from sensor {}",
                    m.sensor_id
                )));
            }
        }
        Ok(MeasurementSet {
            sensors,
            measurements,
            geometry,
        })
    }

    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn sensor(&self, id: u32) -> Option<&Sensor> {
        self.sensors.iter().find(|s| s.id == id)
    }

    fn positions(&self) -> BTreeMap<u32, (f64, f64)> {
        self.sensors.iter().map(|s| (s.id, (s.x, s.y))).collect()
    }

    /// Distinct channel indices in ascending order.
    pub fn channels(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.measurements.iter().map(|m| m.channel).collect();
        set.into_iter().collect()
    }

    /// Distinct time indices in ascending order.
    pub fn times(&self) -> Vec<u64> {
        let set: BTreeSet<u64> = self.measurements.iter().map(|m| m.time_index).collect();
        set.into_iter().collect()
    }

    /// Unrejected observations on `channel`, optionally restricted to one
    /// time index, in measurement order.
    pub fn samples(&self, channel: usize, time: Option<u64>) -> Vec<Sample> {
        let pos = self.positions();
        self.measurements
            .iter()
            .filter(|m| {
                m.channel == channel && !m.flags.rejected && time.is_none_or(|t| t == m.time_index)
            })
            .map(|m| {
                let (x, y) = pos[&m.sensor_id];
                Sample {
                    x,
                    y,
                    value: m.psd_db,
                }
            })
            .collect()
    }

    pub fn rejected_count(&self) -> usize {
        self.measurements.iter().filter(|m| m.flags.rejected).count()
    }

    pub(crate) fn with_measurements(&self, measurements: Vec<Measurement>) -> MeasurementSet {
        MeasurementSet {
            sensors: self.sensors.clone(),
            measurements,
            geometry: self.geometry,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    UniformGrid,
    UniformRandom,
    Custom(Vec<(f64, f64)>),
}

/// Places `n` sensors over the area.
///
/// `UniformGrid` fills a near-square lattice row by row from the north; the
/// last, partially filled row is spread evenly across the width.
pub fn place_sensors(geometry: &Geometry, n: usize, placement: &Placement, seed: u64) -> Result<Vec<Sensor>> {
    if n < 1 {
        return Err(Error::InvalidInput("need at least one sensor".into()));
    }
    let (w, h) = (geometry.width(), geometry.height());
    let positions: Vec<(f64, f64)> = match placement {
        Placement::UniformGrid => {
            if n > geometry.n_cells() {
                return Err(Error::InvalidInput(format!(
                    "{n} sensors exceed the {} grid cells",
                    geometry.n_cells()
                )));
            }
            let cols = ((n as f64 * w / h).sqrt().ceil() as usize).clamp(1, n);
            let rows = n.div_ceil(cols);
            let mut out = Vec::with_capacity(n);
            for i in 0..rows {
                let in_row = if i + 1 == rows { n - cols * (rows - 1) } else { cols };
                let y = geometry.y_max() - (i as f64 + 0.5) * h / rows as f64;
                for j in 0..in_row {
                    let x = geometry.origin_x + (j as f64 + 0.5) * w / in_row as f64;
                    out.push((x, y));
                }
            }
            out
        }
        Placement::UniformRandom => {
            let mut r = rng::substream(seed, "placement", 0);
            (0..n)
                .map(|_| {
                    (
                        geometry.origin_x + r.random::<f64>() * w,
                        geometry.origin_y + r.random::<f64>() * h,
                    )
                })
                .collect()
        }
        Placement::Custom(ps) => {
            if ps.len() != n {
                return Err(Error::InvalidInput(format!(
                    "{} custom positions for {n} sensors",
                    ps.len()
                )));
            }
            if let Some((x, y)) = ps.iter().find(|(x, y)| !geometry.contains(*x, *y)) {
                return Err(Error::InvalidInput(format!(
                    "custom sensor position ({x}, {y}) outside the area"
                )));
            }
            ps.clone()
        }
    };
    Ok(positions
        .into_iter()
        .enumerate()
        .map(|(i, (x, y))| Sensor {
            id: i as u32,
            x,
            y,
            kind: SensorKind::Dedicated,
        })
        .collect())
}

/// Samples the dB truth at every sensor for every channel and adds
/// `N(0, noise_sigma_db²)` noise.
pub fn synthesize_measurements(
    truth: &BandGrid,
    sensors: &[Sensor],
    noise_sigma_db: f64,
    seed: u64,
    time_index: u64,
) -> Result<MeasurementSet> {
    if !(noise_sigma_db >= 0.0) {
        return Err(Error::InvalidInput("noise sigma must be non-negative".into()));
    }
    let truth_db = truth.to_db();
    let noise = Normal::new(0.0, noise_sigma_db).expect("finite sigma");
    let mut r = rng::substream(seed, "noise", time_index);
    let mut measurements = Vec::with_capacity(sensors.len() * truth.n_channels());
    for s in sensors {
        for (k, g) in truth_db.grids().iter().enumerate() {
            let clean = g.sample_bilinear(s.x, s.y)?;
            let psd_db = if noise_sigma_db > 0.0 {
                clean + noise.sample(&mut r)
            } else {
                clean
            };
            measurements.push(Measurement {
                sensor_id: s.id,
                channel: k,
                time_index,
                psd_db,
                flags: MeasurementFlags::default(),
            });
        }
    }
    MeasurementSet::new(sensors.to_vec(), measurements, *truth.geometry())
}

/// Uniform mid-rise quantizer with `2^n_bits` levels over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantizer {
    pub n_bits: u32,
    pub lo: f64,
    pub hi: f64,
}

impl Quantizer {
    pub fn new(n_bits: u32, lo: f64, hi: f64) -> Result<Self> {
        if !(1..=31).contains(&n_bits) {
            return Err(Error::InvalidInput(format!("n_bits {n_bits} out of range")));
        }
        if !(lo < hi) {
            return Err(Error::InvalidInput(format!("empty quantizer range [{lo}, {hi}]")));
        }
        Ok(Quantizer { n_bits, lo, hi })
    }

    #[inline]
    pub fn levels(&self) -> u64 {
        1u64 << self.n_bits
    }

    #[inline]
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.levels() as f64
    }

    pub fn encode(&self, v: f64) -> u32 {
        let top = (self.levels() - 1) as f64;
        ((v - self.lo) / self.step()).floor().clamp(0.0, top) as u32
    }

    pub fn decode(&self, code: u32) -> f64 {
        self.lo + (f64::from(code) + 0.5) * self.step()
    }
}

/// Replaces each finite PSD by its quantizer reconstruction. With one bit
/// this is a threshold test at the midpoint of the range.
pub fn quantize_measurements(ms: &MeasurementSet, n_bits: u32, db_min: f64, db_max: f64) -> Result<MeasurementSet> {
    let q = Quantizer::new(n_bits, db_min, db_max)?;
    let measurements = ms
        .measurements
        .iter()
        .map(|m| {
            let mut m = *m;
            if m.psd_db.is_finite() {
                m.psd_db = q.decode(q.encode(m.psd_db));
                m.flags.quantized = true;
            }
            m
        })
        .collect();
    Ok(ms.with_measurements(measurements))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Lower bound on the robust residual scale, dB. Noiseless or lattice-exact
/// data drive the MAD to zero, which would flag any gradient bias at edges.
pub const MIN_RESIDUAL_SCALE_DB: f64 = 1.0;

/// Flags measurements whose residual against the median of their
/// `neighbor_count` nearest same-channel neighbours exceeds
/// `k_mad · max(1.4826 · MAD, MIN_RESIDUAL_SCALE_DB)`, the MAD taken over all
/// residuals of the channel. Values are never modified.
pub fn filter_bad_data(ms: &MeasurementSet, k_mad: f64, neighbor_count: usize) -> Result<MeasurementSet> {
    if !(k_mad > 0.0) {
        return Err(Error::InvalidInput("k_mad must be positive".into()));
    }
    if neighbor_count < 3 {
        return Err(Error::InvalidInput("neighbor_count must be at least 3".into()));
    }
    let pos = ms.positions();
    let mut out = ms.measurements.clone();

    let mut groups: BTreeMap<(usize, u64), Vec<usize>> = BTreeMap::new();
    for (i, m) in ms.measurements.iter().enumerate() {
        if !m.flags.rejected {
            groups.entry((m.channel, m.time_index)).or_default().push(i);
        }
    }
    for idx in groups.values() {
        if idx.len() < neighbor_count + 1 {
            continue;
        }
        let pts: Vec<(f64, f64, f64)> = idx
            .iter()
            .map(|&i| {
                let m = &ms.measurements[i];
                let (x, y) = pos[&m.sensor_id];
                (x, y, m.psd_db)
            })
            .collect();
        let residuals: Vec<f64> = pts
            .iter()
            .enumerate()
            .map(|(a, &(x, y, v))| {
                let mut near: Vec<(f64, usize)> = pts
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| *b != a)
                    .map(|(b, &(xb, yb, _))| ((xb - x).hypot(yb - y), b))
                    .collect();
                near.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
                let mut vals: Vec<f64> = near[..neighbor_count].iter().map(|&(_, b)| pts[b].2).collect();
                v - median(&mut vals)
            })
            .collect();
        let mut tmp = residuals.clone();
        let center = median(&mut tmp);
        let mut dev: Vec<f64> = residuals.iter().map(|r| (r - center).abs()).collect();
        let scale = (1.4826 * median(&mut dev)).max(MIN_RESIDUAL_SCALE_DB);
        for (&i, r) in idx.iter().zip(&residuals) {
            if r.abs() > k_mad * scale {
                out[i].flags.rejected = true;
            }
        }
    }
    Ok(ms.with_measurements(out))
}

const CSV_HEADER: [&str; 7] = ["sensor_id", "x_m", "y_m", "channel", "time_index", "psd_db", "flags"];

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    sensor_id: u32,
    x_m: f64,
    y_m: f64,
    channel: usize,
    time_index: u64,
    psd_db: f64,
    flags: String,
}

/// Writes one row per measurement with the sensor position inlined.
pub fn write_measurements_csv<W: Write>(ms: &MeasurementSet, w: W) -> Result<()> {
    let pos = ms.positions();
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(CSV_HEADER)?;
    for m in &ms.measurements {
        let (x, y) = pos[&m.sensor_id];
        wtr.serialize(CsvRow {
            sensor_id: m.sensor_id,
            x_m: x,
            y_m: y,
            channel: m.channel,
            time_index: m.time_index,
            psd_db: m.psd_db,
            flags: m.flags.token().to_string(),
        })?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Reads measurements, validating bounds, sensor position consistency and
/// duplicate `(sensor, channel, time)` keys.
pub fn read_measurements_csv<R: Read>(r: R, geometry: Geometry) -> Result<MeasurementSet> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::InvalidInput(format!("unexpected CSV header {headers:?}")));
    }
    let mut sensors: BTreeMap<u32, Sensor> = BTreeMap::new();
    let mut measurements = Vec::new();
    for row in rdr.deserialize() {
        let row: CsvRow = row?;
        let s = sensors.entry(row.sensor_id).or_insert(Sensor {
            id: row.sensor_id,
            x: row.x_m,
            y: row.y_m,
            kind: SensorKind::Dedicated,
        });
        if s.x != row.x_m || s.y != row.y_m {
            return Err(Error::InvalidInput(format!(
                "sensor {} reported at two positions",
                row.sensor_id
            )));
        }
        measurements.push(Measurement {
            sensor_id: row.sensor_id,
            channel: row.channel,
            time_index: row.time_index,
            psd_db: row.psd_db,
            flags: MeasurementFlags::parse(&row.flags)?,
        });
    }
    MeasurementSet::new(sensors.into_values().collect(), measurements, geometry)
}
