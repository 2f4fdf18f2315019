//! Ground-truth radio maps by superposition of per-transmitter contributions.
//!
//! Each transmitter contributes `P · g(x)` watts on its channel, where the
//! channel gain `g` in dB is log-distance path loss plus correlated
//! log-normal shadowing minus the penetration loss of every wall crossed by
//! the straight path. The wall term stands in for a full ray tracer.

mod shadowing;

pub use shadowing::{shadowing_field, shadowing_kernel};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BandGrid, BandLayout, Geometry, Grid2D, Unit};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transmitter {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    /// Transmit power in watts.
    pub tx_power_w: f64,
    /// Index into the scenario's channel list.
    pub channel: usize,
    /// Channel gain at 1 m, dB.
    pub reference_gain_db: f64,
}

/// Straight wall segment with a fixed loss per crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub penetration_loss_db: f64,
}

impl Obstacle {
    pub fn validate(&self) -> Result<()> {
        if self.x0 == self.x1 && self.y0 == self.y1 {
            return Err(Error::InvalidInput("obstacle endpoints coincide".into()));
        }
        if !(self.penetration_loss_db > 0.0) {
            return Err(Error::InvalidInput(format!(
                "penetration loss must be positive, got {}",
                self.penetration_loss_db
            )));
        }
        Ok(())
    }

    /// True when the open segment `(a, b)` crosses this wall at a single
    /// interior point of both. Touching an endpoint or running collinear does
    /// not count.
    pub fn crosses(&self, ax: f64, ay: f64, bx: f64, by: f64) -> bool {
        let d1 = orient(self.x0, self.y0, self.x1, self.y1, ax, ay);
        let d2 = orient(self.x0, self.y0, self.x1, self.y1, bx, by);
        let d3 = orient(ax, ay, bx, by, self.x0, self.y0);
        let d4 = orient(ax, ay, bx, by, self.x1, self.y1);
        d1 * d2 < 0.0 && d3 * d4 < 0.0
    }
}

#[inline]
fn orient(ax: f64, ay: f64, bx: f64, by: f64, cx: f64, cy: f64) -> f64 {
    (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    pub pathloss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub decorrelation_distance_m: f64,
    pub noise_floor_dbw: f64,
}

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_exponent > 0.0) {
            return Err(Error::InvalidInput("path-loss exponent must be positive".into()));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(Error::InvalidInput("shadowing sigma must be non-negative".into()));
        }
        if !(self.decorrelation_distance_m > 0.0) {
            return Err(Error::InvalidInput("decorrelation distance must be positive".into()));
        }
        if !self.noise_floor_dbw.is_finite() {
            return Err(Error::InvalidInput("noise floor must be finite".into()));
        }
        Ok(())
    }
}

/// Log-distance gain in dB: `ref − 10·η·log10(max(d, d_min) / 1 m)`.
pub fn pathloss_gain_db(p: &PropagationParams, tx: &Transmitter, x: f64, y: f64, d_min: f64) -> f64 {
    let d = (x - tx.x).hypot(y - tx.y).max(d_min);
    tx.reference_gain_db - 10.0 * p.pathloss_exponent * d.log10()
}

/// Summed penetration loss of walls strictly crossed by the path `tx → (x, y)`.
pub fn obstruction_loss_db(obstacles: &[Obstacle], tx: &Transmitter, x: f64, y: f64) -> f64 {
    obstacles
        .iter()
        .filter(|o| o.crosses(tx.x, tx.y, x, y))
        .map(|o| o.penetration_loss_db)
        .sum()
}

/// Declarative description of a radio environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub layout: BandLayout,
    pub transmitters: Vec<Transmitter>,
    pub obstacles: Vec<Obstacle>,
    pub propagation: PropagationParams,
    pub seed: u64,
}

impl Scenario {
    pub fn new(
        layout: BandLayout,
        transmitters: Vec<Transmitter>,
        obstacles: Vec<Obstacle>,
        propagation: PropagationParams,
        seed: u64,
    ) -> Result<Self> {
        let s = Scenario {
            layout,
            transmitters,
            obstacles,
            propagation,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.layout.geometry;
        g.validate()?;
        if self.layout.channel_centers.is_empty() {
            return Err(Error::InvalidInput("scenario needs at least one channel".into()));
        }
        if self
            .layout
            .channel_centers
            .windows(2)
            .any(|w| !(w[1] > w[0]))
        {
            return Err(Error::InvalidInput("channel centers must increase".into()));
        }
        self.propagation.validate()?;
        for (i, t) in self.transmitters.iter().enumerate() {
            if !(t.tx_power_w > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "transmitter {} has non-positive power",
                    t.id
                )));
            }
            if t.channel >= self.layout.n_channels() {
                return Err(Error::InvalidInput(format!(
                    "transmitter {} uses channel {} of {}",
                    t.id,
                    t.channel,
                    self.layout.n_channels()
                )));
            }
            if !g.contains(t.x, t.y) {
                return Err(Error::InvalidInput(format!(
                    "transmitter {} at ({}, {}) lies outside the area",
                    t.id, t.x, t.y
                )));
            }
            if self.transmitters[..i].iter().any(|o| o.id == t.id) {
                return Err(Error::InvalidInput(format!("duplicate transmitter id {}", t.id)));
            }
        }
        for o in &self.obstacles {
            o.validate()?;
        }
        Ok(())
    }

    pub fn geometry(&self) -> &Geometry {
        &self.layout.geometry
    }

    /// Near-field clamp for the log-distance law.
    pub fn d_min(&self) -> f64 {
        self.layout.geometry.cell_size / 2.0
    }

    pub fn transmitter(&self, id: u32) -> Result<&Transmitter> {
        self.transmitters
            .iter()
            .find(|t| t.id == id)
            .ok_or(Error::UnknownTransmitter(id))
    }

    /// Same scenario restricted to the listed transmitter ids.
    pub fn with_transmitters(&self, ids: &[u32]) -> Result<Scenario> {
        let txs = ids
            .iter()
            .map(|id| self.transmitter(*id).cloned())
            .collect::<Result<Vec<_>>>()?;
        Ok(Scenario {
            transmitters: txs,
            ..self.clone()
        })
    }

    /// Shadowing field of one transmitter. The stream is keyed by the
    /// transmitter id, so sub-scenarios reproduce the same field.
    pub fn shadowing_for(&self, tx: &Transmitter) -> Grid2D {
        shadowing_field(
            &self.propagation,
            &self.layout.geometry,
            rng::substream_seed(self.seed, "shadowing", u64::from(tx.id)),
        )
    }

    /// Per-transmitter shadowing fields in transmitter order.
    pub fn shadowing_fields(&self) -> Vec<Grid2D> {
        self.transmitters.iter().map(|t| self.shadowing_for(t)).collect()
    }
}

fn gain_db_grid(s: &Scenario, tx: &Transmitter, shadowing: &Grid2D) -> Result<Grid2D> {
    let geo = *s.geometry();
    geo.ensure_same(shadowing.geometry())?;
    let d_min = s.d_min();
    let sh = shadowing.values();
    let values: Vec<f64> = (0..geo.n_rows)
        .into_par_iter()
        .flat_map_iter(|r| {
            (0..geo.n_cols).map(move |c| {
                let (x, y) = geo.cell_center(r, c);
                pathloss_gain_db(&s.propagation, tx, x, y, d_min) + sh[geo.index(r, c)]
                    - obstruction_loss_db(&s.obstacles, tx, x, y)
            })
        })
        .collect();
    Grid2D::new(geo, values, Unit::Db)
}

/// Channel gain map of one transmitter in dB, excluding transmit power.
pub fn channel_gain_map(s: &Scenario, tx_id: u32) -> Result<Grid2D> {
    let tx = s.transmitter(tx_id)?;
    gain_db_grid(s, tx, &s.shadowing_for(tx))
}

/// Ground truth in linear watts, one grid per channel.
pub fn generate_ground_truth(s: &Scenario) -> Result<BandGrid> {
    generate_ground_truth_with(s, &s.shadowing_fields())
}

/// Ground truth using caller-supplied shadowing fields, one per transmitter.
pub fn generate_ground_truth_with(s: &Scenario, shadowing: &[Grid2D]) -> Result<BandGrid> {
    s.validate()?;
    if shadowing.len() != s.transmitters.len() {
        return Err(Error::InvalidInput(format!(
            "{} shadowing fields for {} transmitters",
            shadowing.len(),
            s.transmitters.len()
        )));
    }
    let geo = *s.geometry();
    let mut acc = vec![vec![0.0f64; geo.n_cells()]; s.layout.n_channels()];
    for (tx, sh) in s.transmitters.iter().zip(shadowing) {
        let gain = gain_db_grid(s, tx, sh)?;
        for (a, g) in acc[tx.channel].iter_mut().zip(gain.values()) {
            *a += tx.tx_power_w * 10f64.powf(g / 10.0);
        }
    }
    let grids = acc
        .into_iter()
        .map(|v| Grid2D::new(geo, v, Unit::LinearWatts))
        .collect::<Result<Vec<_>>>()?;
    BandGrid::new(
        grids,
        s.layout.channel_centers.clone(),
        s.layout.channel_width,
    )
}

/// Places `count` walls uniformly at random inside the area.
pub fn random_obstacles(
    geometry: &Geometry,
    count: usize,
    min_length: f64,
    max_length: f64,
    penetration_loss_db: f64,
    seed: u64,
) -> Result<Vec<Obstacle>> {
    use rand::Rng;
    if !(min_length > 0.0) || max_length < min_length {
        return Err(Error::InvalidInput(format!(
            "obstacle length range [{min_length}, {max_length}]"
        )));
    }
    let mut r = rng::substream(seed, "obstacles", 0);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let cx = geometry.origin_x + r.random::<f64>() * geometry.width();
        let cy = geometry.origin_y + r.random::<f64>() * geometry.height();
        let len = if max_length > min_length {
            r.random_range(min_length..max_length)
        } else {
            min_length
        };
        let theta = r.random::<f64>() * std::f64::consts::PI;
        let (dx, dy) = (0.5 * len * theta.cos(), 0.5 * len * theta.sin());
        let clamp_x = |v: f64| v.clamp(geometry.origin_x, geometry.x_max());
        let clamp_y = |v: f64| v.clamp(geometry.origin_y, geometry.y_max());
        let o = Obstacle {
            x0: clamp_x(cx - dx),
            y0: clamp_y(cy - dy),
            x1: clamp_x(cx + dx),
            y1: clamp_y(cy + dy),
            penetration_loss_db,
        };
        if o.validate().is_ok() {
            out.push(o);
        }
    }
    Ok(out)
}
