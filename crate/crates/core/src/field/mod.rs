//! Raster field types shared by every other module.
//!
//! A [`Grid2D`] samples a continuous field at cell centers. The origin is the
//! south-west corner of the extent and rows are stored north-up, so row 0 is
//! the northernmost row.

mod raster;

pub use raster::{export_raster, import_raster, read_raster, write_raster};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowest representable level in the dB domain.
pub const DB_FLOOR: f64 = -200.0;
/// Linear power corresponding to [`DB_FLOOR`].
pub const LINEAR_FLOOR: f64 = 1e-20;

/// Converts watts to dBW, clamping at [`DB_FLOOR`].
#[inline]
pub fn watts_to_db(w: f64) -> f64 {
    if w > LINEAR_FLOOR {
        10.0 * w.log10()
    } else {
        DB_FLOOR
    }
}

/// Converts dBW to watts.
#[inline]
pub fn db_to_watts(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "dB")]
    Db,
    #[serde(rename = "linear_watts")]
    LinearWatts,
}

impl Unit {
    pub fn token(self) -> &'static str {
        match self {
            Unit::Db => "dB",
            Unit::LinearWatts => "linear_watts",
        }
    }

    pub fn parse(s: &str) -> Option<Unit> {
        match s {
            "dB" => Some(Unit::Db),
            "linear_watts" => Some(Unit::LinearWatts),
            _ => None,
        }
    }
}

/// Placement and resolution of a raster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl Geometry {
    pub fn new(
        origin_x: f64,
        origin_y: f64,
        cell_size: f64,
        n_rows: usize,
        n_cols: usize,
    ) -> Result<Self> {
        let g = Geometry {
            origin_x,
            origin_y,
            cell_size,
            n_rows,
            n_cols,
        };
        g.validate()?;
        Ok(g)
    }

    /// Smallest grid of `cell_size` cells covering `width × height` meters.
    pub fn covering(
        origin_x: f64,
        origin_y: f64,
        width: f64,
        height: f64,
        cell_size: f64,
    ) -> Result<Self> {
        if !(cell_size > 0.0) || !(width > 0.0) || !(height > 0.0) {
            return Err(Error::InvalidInput(format!(
                "area {width}×{height} m at resolution {cell_size} m"
            )));
        }
        let n_cols = ceil_ratio(width, cell_size);
        let n_rows = ceil_ratio(height, cell_size);
        Geometry::new(origin_x, origin_y, cell_size, n_rows, n_cols)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rows < 1 || self.n_cols < 1 {
            return Err(Error::InvalidInput(format!(
                "grid must have at least one cell, got {}×{}",
                self.n_rows, self.n_cols
            )));
        }
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return Err(Error::InvalidInput(format!(
                "cell size must be positive, got {}",
                self.cell_size
            )));
        }
        if !self.origin_x.is_finite() || !self.origin_y.is_finite() {
            return Err(Error::InvalidInput("origin must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n_rows * self.n_cols
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.n_cols as f64 * self.cell_size
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.n_rows as f64 * self.cell_size
    }

    #[inline]
    pub fn x_max(&self) -> f64 {
        self.origin_x + self.width()
    }

    #[inline]
    pub fn y_max(&self) -> f64 {
        self.origin_y + self.height()
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    /// Length of the extent's diagonal.
    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.n_cols + col
    }

    #[inline]
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.cell_size,
            self.origin_y + (self.n_rows as f64 - row as f64 - 0.5) * self.cell_size,
        )
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.origin_x + 0.5 * self.width(),
            self.origin_y + 0.5 * self.height(),
        )
    }

    /// Closed bounding box test.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.origin_x && x <= self.x_max() && y >= self.origin_y && y <= self.y_max()
    }

    /// Cell containing `(x, y)`; points on the far edges map to the last cell.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !self.contains(x, y) {
            return None;
        }
        let col = (((x - self.origin_x) / self.cell_size).floor() as usize).min(self.n_cols - 1);
        let row = (((self.y_max() - y) / self.cell_size).floor() as usize).min(self.n_rows - 1);
        Some((row, col))
    }

    pub(crate) fn same_as(&self, other: &Geometry) -> bool {
        self == other
    }

    pub(crate) fn ensure_same(&self, other: &Geometry) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// `ceil(a / b)` that tolerates representation error, e.g. `0.3 / 0.1`.
pub(crate) fn ceil_ratio(a: f64, b: f64) -> usize {
    let q = a / b;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r.max(1.0) as usize
    } else {
        q.ceil().max(1.0) as usize
    }
}

/// Rectangular raster of per-cell values, immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    geometry: Geometry,
    values: Vec<f64>,
    unit: Unit,
}

impl Grid2D {
    pub fn new(geometry: Geometry, values: Vec<f64>, unit: Unit) -> Result<Self> {
        geometry.validate()?;
        if values.len() != geometry.n_cells() {
            return Err(Error::InvalidInput(format!(
                "{} values for a {}×{} grid",
                values.len(),
                geometry.n_rows,
                geometry.n_cols
            )));
        }
        if unit == Unit::LinearWatts {
            if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
                return Err(Error::InvalidInput(format!(
                    "linear power must be non-negative, got {v}"
                )));
            }
        }
        Ok(Grid2D {
            geometry,
            values,
            unit,
        })
    }

    pub fn filled(geometry: Geometry, value: f64, unit: Unit) -> Result<Self> {
        Grid2D::new(geometry, vec![value; geometry.n_cells()], unit)
    }

    /// Builds a grid by evaluating `f(row, col, x, y)` at every cell center.
    pub fn from_fn<F>(geometry: Geometry, unit: Unit, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, f64, f64) -> f64,
    {
        let mut values = Vec::with_capacity(geometry.n_cells());
        for r in 0..geometry.n_rows {
            for c in 0..geometry.n_cols {
                let (x, y) = geometry.cell_center(r, c);
                values.push(f(r, c, x, y));
            }
        }
        Grid2D::new(geometry, values, unit)
    }

    #[inline]
    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    #[inline]
    pub fn unit(&self) -> Unit {
        self.unit
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.geometry.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.geometry.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.geometry.index(row, col)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Applies `f` cell-wise, keeping geometry.
    pub fn map(&self, unit: Unit, f: impl Fn(f64) -> f64) -> Result<Grid2D> {
        Grid2D::new(
            self.geometry,
            self.values.iter().map(|&v| f(v)).collect(),
            unit,
        )
    }

    /// Per-cell `10·log10(P / 1 W)`, clamped at [`DB_FLOOR`]. A grid that is
    /// already in dB is returned unchanged.
    pub fn to_db(&self) -> Grid2D {
        match self.unit {
            Unit::Db => self.clone(),
            Unit::LinearWatts => Grid2D {
                geometry: self.geometry,
                values: self.values.iter().map(|&v| watts_to_db(v)).collect(),
                unit: Unit::Db,
            },
        }
    }

    /// Per-cell `10^(v/10)` W. A linear grid is returned unchanged.
    pub fn from_db(&self) -> Grid2D {
        match self.unit {
            Unit::LinearWatts => self.clone(),
            Unit::Db => Grid2D {
                geometry: self.geometry,
                values: self.values.iter().map(|&v| db_to_watts(v)).collect(),
                unit: Unit::LinearWatts,
            },
        }
    }

    /// Bilinear interpolation between the four surrounding cell centers.
    ///
    /// Queries between the outermost centers and the grid edge take the
    /// nearest edge value along the clipped axis.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Result<f64> {
        let g = &self.geometry;
        if !x.is_finite() || !y.is_finite() || !g.contains(x, y) {
            return Err(Error::OutOfBounds { x, y });
        }
        let u = (x - g.origin_x) / g.cell_size - 0.5;
        let v = (g.y_max() - y) / g.cell_size - 0.5;
        let (c0, fc) = split_axis(u, g.n_cols);
        let (r0, fr) = split_axis(v, g.n_rows);
        let c1 = (c0 + 1).min(g.n_cols - 1);
        let r1 = (r0 + 1).min(g.n_rows - 1);
        let top = lerp(self.get(r0, c0), self.get(r0, c1), fc);
        let bottom = lerp(self.get(r1, c0), self.get(r1, c1), fc);
        Ok(lerp(top, bottom, fr))
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else if t == 1.0 {
        b
    } else {
        a + (b - a) * t
    }
}

/// Splits a continuous center-index coordinate into a base index and a
/// fraction in `[0, 1]`, snapping near-integers so centers are hit exactly.
fn split_axis(u: f64, n: usize) -> (usize, f64) {
    if n == 1 {
        return (0, 0.0);
    }
    let last = (n - 1) as f64;
    let u = u.clamp(0.0, last);
    let nearest = u.round();
    let u = if (u - nearest).abs() < 1e-9 { nearest } else { u };
    let base = u.floor().min(last - 1.0);
    (base as usize, u - base)
}

/// One grid per frequency channel, all sharing the same geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct BandGrid {
    grids: Vec<Grid2D>,
    channel_centers: Vec<f64>,
    channel_width: f64,
}

impl BandGrid {
    pub fn new(grids: Vec<Grid2D>, channel_centers: Vec<f64>, channel_width: f64) -> Result<Self> {
        if grids.is_empty() {
            return Err(Error::InvalidInput("band grid needs at least one channel".into()));
        }
        if grids.len() != channel_centers.len() {
            return Err(Error::InvalidInput(format!(
                "{} grids for {} channel centers",
                grids.len(),
                channel_centers.len()
            )));
        }
        if channel_centers.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "channel centers must be strictly increasing".into(),
            ));
        }
        if !(channel_width > 0.0) {
            return Err(Error::InvalidInput("channel width must be positive".into()));
        }
        let g0 = *grids[0].geometry();
        let u0 = grids[0].unit();
        for g in &grids[1..] {
            g0.ensure_same(g.geometry())?;
            if g.unit() != u0 {
                return Err(Error::InvalidInput("mixed units across channels".into()));
            }
        }
        Ok(BandGrid {
            grids,
            channel_centers,
            channel_width,
        })
    }

    /// Single-channel band.
    pub fn single(grid: Grid2D, center: f64, width: f64) -> Result<Self> {
        BandGrid::new(vec![grid], vec![center], width)
    }

    pub fn geometry(&self) -> &Geometry {
        self.grids[0].geometry()
    }

    pub fn unit(&self) -> Unit {
        self.grids[0].unit()
    }

    pub fn n_channels(&self) -> usize {
        self.grids.len()
    }

    pub fn grids(&self) -> &[Grid2D] {
        &self.grids
    }

    pub fn channel(&self, k: usize) -> &Grid2D {
        &self.grids[k]
    }

    pub fn channel_centers(&self) -> &[f64] {
        &self.channel_centers
    }

    pub fn channel_width(&self) -> f64 {
        self.channel_width
    }

    pub fn layout(&self) -> BandLayout {
        BandLayout {
            geometry: *self.geometry(),
            channel_centers: self.channel_centers.clone(),
            channel_width: self.channel_width,
        }
    }

    pub fn to_db(&self) -> BandGrid {
        self.with_grids(self.grids.iter().map(Grid2D::to_db).collect())
    }

    pub fn from_db(&self) -> BandGrid {
        self.with_grids(self.grids.iter().map(Grid2D::from_db).collect())
    }

    pub(crate) fn with_grids(&self, grids: Vec<Grid2D>) -> BandGrid {
        BandGrid {
            grids,
            channel_centers: self.channel_centers.clone(),
            channel_width: self.channel_width,
        }
    }

    pub fn into_grids(self) -> Vec<Grid2D> {
        self.grids
    }
}

/// Geometry plus frequency axis, without values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandLayout {
    pub geometry: Geometry,
    pub channel_centers: Vec<f64>,
    pub channel_width: f64,
}

impl BandLayout {
    pub fn n_channels(&self) -> usize {
        self.channel_centers.len()
    }
}
