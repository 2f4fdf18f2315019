//! Quantized tile storage.
//!
//! Each channel is cut into `tile_size × tile_size` blocks (smaller at the
//! east and south edges). A tile stores its own data minimum and maximum and
//! `n_bits` codes per cell on the uniform level set
//! `db_min + c · (db_max − db_min) / (2^n − 1)`, so both extremes are exact
//! levels, the error is at most half a level spacing, and
//! quantize ∘ dequantize is a fixed point.
//!
//! On disk a tile is a 32-byte little-endian header followed by the codes
//! packed LSB-first:
//!
//! ```text
//! 0  "RMKT"      4  version u8   5  n_bits u8   6  reserved u16
//! 8  db_min f64  16 db_max f64   24 rows u32    28 cols u32
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BandGrid, BandLayout, Grid2D, Unit};

pub const TILE_MAGIC: &[u8; 4] = b"RMKT";
pub const TILE_VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 32;
pub const MIN_TILE_SIZE: usize = 8;

/// Position of a tile: channel and tile row/column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TileKey {
    pub channel: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTile {
    pub key: TileKey,
    pub n_bits: u8,
    pub db_min: f64,
    pub db_max: f64,
    pub rows: usize,
    pub cols: usize,
    /// Row-major codes, each `< 2^n_bits`.
    pub codes: Vec<u16>,
}

fn check_bits(n_bits: u8) -> Result<()> {
    if !(1..=16).contains(&n_bits) {
        return Err(Error::InvalidInput(format!("n_bits must be in [1, 16], got {n_bits}")));
    }
    Ok(())
}

impl QuantizedTile {
    /// Quantizes row-major dB `values` of a `rows × cols` block.
    pub fn encode(key: TileKey, values: &[f64], rows: usize, cols: usize, n_bits: u8) -> Result<Self> {
        check_bits(n_bits)?;
        if values.len() != rows * cols || values.is_empty() {
            return Err(Error::InvalidInput(format!(
                "tile of {rows}×{cols} given {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in tile".into()));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let top = (1u32 << n_bits) - 1;
        let codes = if hi > lo {
            let step = (hi - lo) / top as f64;
            values
                .iter()
                .map(|&v| (((v - lo) / step).round() as u32).min(top) as u16)
                .collect()
        } else {
            vec![0; values.len()]
        };
        Ok(QuantizedTile {
            key,
            n_bits,
            db_min: lo,
            db_max: hi,
            rows,
            cols,
            codes,
        })
    }

    fn top(&self) -> u32 {
        (1u32 << self.n_bits) - 1
    }

    /// Level spacing; zero for a constant tile.
    pub fn step(&self) -> f64 {
        (self.db_max - self.db_min) / self.top() as f64
    }

    /// Worst-case reconstruction error, half a level spacing.
    pub fn error_bound(&self) -> f64 {
        self.step() / 2.0
    }

    pub fn decode_code(&self, c: u16) -> f64 {
        if c as u32 >= self.top() && self.db_max > self.db_min {
            self.db_max
        } else {
            self.db_min + c as f64 * self.step()
        }
    }

    pub fn decode(&self) -> Vec<f64> {
        self.codes.iter().map(|&c| self.decode_code(c)).collect()
    }

    /// Serialized tile: header plus packed codes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.n_bits as usize;
        let mut out = Vec::with_capacity(HEADER_BYTES + (self.codes.len() * n).div_ceil(8));
        out.extend_from_slice(TILE_MAGIC);
        out.push(TILE_VERSION);
        out.push(self.n_bits);
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&self.db_min.to_le_bytes());
        out.extend_from_slice(&self.db_max.to_le_bytes());
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        let mut packed = vec![0u8; (self.codes.len() * n).div_ceil(8)];
        let mut bit = 0usize;
        for &c in &self.codes {
            for b in 0..n {
                if (c >> b) & 1 == 1 {
                    packed[bit / 8] |= 1 << (bit % 8);
                }
                bit += 1;
            }
        }
        out.extend_from_slice(&packed);
        out
    }

    pub fn from_bytes(key: TileKey, bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Tile(m.to_string());
        if bytes.len() < HEADER_BYTES {
            return Err(bad("truncated header"));
        }
        if &bytes[0..4] != TILE_MAGIC {
            return Err(bad("bad magic"));
        }
        if bytes[4] != TILE_VERSION {
            return Err(Error::Tile(format!("unsupported version {}", bytes[4])));
        }
        let n_bits = bytes[5];
        check_bits(n_bits).map_err(|e| Error::Tile(e.to_string()))?;
        let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let u = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
        let (db_min, db_max, rows, cols) = (f(8), f(16), u(24), u(28));
        if !db_min.is_finite() || !db_max.is_finite() || db_min > db_max {
            return Err(bad("invalid level range"));
        }
        let n = n_bits as usize;
        let count = rows * cols;
        let body = &bytes[HEADER_BYTES..];
        if count == 0 || body.len() != (count * n).div_ceil(8) {
            return Err(Error::Tile(format!("payload size {} does not match {rows}×{cols}", body.len())));
        }
        let mut codes = Vec::with_capacity(count);
        let mut bit = 0usize;
        for _ in 0..count {
            let mut c = 0u16;
            for b in 0..n {
                if (body[bit / 8] >> (bit % 8)) & 1 == 1 {
                    c |= 1 << b;
                }
                bit += 1;
            }
            codes.push(c);
        }
        Ok(QuantizedTile {
            key,
            n_bits,
            db_min,
            db_max,
            rows,
            cols,
            codes,
        })
    }
}

/// Tiling of a band map: how cells map to tiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tiling {
    pub layout: BandLayout,
    pub tile_size: usize,
    pub n_bits: u8,
}

impl Tiling {
    pub fn new(layout: BandLayout, tile_size: usize, n_bits: u8) -> Result<Self> {
        check_bits(n_bits)?;
        if tile_size < MIN_TILE_SIZE {
            return Err(Error::InvalidInput(format!(
                "tile_size must be at least {MIN_TILE_SIZE}, got {tile_size}"
            )));
        }
        layout.geometry.validate()?;
        Ok(Tiling { layout, tile_size, n_bits })
    }

    pub fn tile_rows(&self) -> usize {
        self.layout.geometry.n_rows.div_ceil(self.tile_size)
    }

    pub fn tile_cols(&self) -> usize {
        self.layout.geometry.n_cols.div_ceil(self.tile_size)
    }

    pub fn tiles_per_channel(&self) -> usize {
        self.tile_rows() * self.tile_cols()
    }

    /// Cell ranges `(row0, rows, col0, cols)` covered by a tile.
    pub fn extent(&self, key: TileKey) -> (usize, usize, usize, usize) {
        let g = &self.layout.geometry;
        let r0 = key.row * self.tile_size;
        let c0 = key.col * self.tile_size;
        (r0, self.tile_size.min(g.n_rows - r0), c0, self.tile_size.min(g.n_cols - c0))
    }

    /// All keys in channel, row, column order.
    pub fn keys(&self) -> Vec<TileKey> {
        let mut out = Vec::with_capacity(self.layout.n_channels() * self.tiles_per_channel());
        for channel in 0..self.layout.n_channels() {
            for row in 0..self.tile_rows() {
                for col in 0..self.tile_cols() {
                    out.push(TileKey { channel, row, col });
                }
            }
        }
        out
    }

    /// Row-major values of one tile from a dB grid.
    pub fn cut(&self, grid: &Grid2D, key: TileKey) -> Vec<f64> {
        let (r0, nr, c0, nc) = self.extent(key);
        let mut out = Vec::with_capacity(nr * nc);
        for r in r0..r0 + nr {
            for c in c0..c0 + nc {
                out.push(grid.get(r, c));
            }
        }
        out
    }

    pub fn encode(&self, map: &BandGrid, key: TileKey) -> Result<QuantizedTile> {
        let (_, nr, _, nc) = self.extent(key);
        let db = map.channel(key.channel).to_db();
        QuantizedTile::encode(key, &self.cut(&db, key), nr, nc, self.n_bits)
    }

    fn check_map(&self, map: &BandGrid) -> Result<()> {
        map.geometry().ensure_same(&self.layout.geometry)?;
        if map.n_channels() != self.layout.n_channels() {
            return Err(Error::GeometryMismatch(format!(
                "{} channels vs {} in tiling",
                map.n_channels(),
                self.layout.n_channels()
            )));
        }
        Ok(())
    }

    /// Rebuilds a dB band map from a complete tile set.
    pub fn assemble(&self, tiles: &BTreeMap<TileKey, QuantizedTile>) -> Result<BandGrid> {
        let g = self.layout.geometry;
        let mut grids = Vec::with_capacity(self.layout.n_channels());
        for channel in 0..self.layout.n_channels() {
            let mut values = vec![f64::NAN; g.n_cells()];
            for row in 0..self.tile_rows() {
                for col in 0..self.tile_cols() {
                    let key = TileKey { channel, row, col };
                    let t = tiles
                        .get(&key)
                        .ok_or_else(|| Error::Tile(format!("missing tile {key:?}")))?;
                    let (r0, nr, c0, nc) = self.extent(key);
                    if (t.rows, t.cols) != (nr, nc) {
                        return Err(Error::Tile(format!("tile {key:?} is {}×{}, expected {nr}×{nc}", t.rows, t.cols)));
                    }
                    for (i, v) in t.decode().into_iter().enumerate() {
                        values[g.index(r0 + i / nc, c0 + i % nc)] = v;
                    }
                }
            }
            grids.push(Grid2D::new(g, values, Unit::Db)?);
        }
        BandGrid::new(grids, self.layout.channel_centers.clone(), self.layout.channel_width)
    }
}

/// Quantizes every tile of `map` (converted to dB).
pub fn quantize_tiles(map: &BandGrid, n_bits: u8, tile_size: usize) -> Result<(Tiling, Vec<QuantizedTile>)> {
    let tiling = Tiling::new(map.layout(), tile_size, n_bits)?;
    let tiles = tiling.keys().into_iter().map(|k| tiling.encode(map, k)).collect::<Result<Vec<_>>>()?;
    Ok((tiling, tiles))
}

/// Inverse of [`quantize_tiles`]; the result is in dB.
pub fn dequantize_tiles(tiling: &Tiling, tiles: &[QuantizedTile]) -> Result<BandGrid> {
    let map: BTreeMap<TileKey, QuantizedTile> = tiles.iter().map(|t| (t.key, t.clone())).collect();
    tiling.assemble(&map)
}

/// Versioned tile store: the full tile set of the first committed epoch and
/// only the re-encoded tiles of every later one.
#[derive(Debug, Clone, PartialEq)]
pub struct TileStore {
    tiling: Tiling,
    /// Per-epoch deltas, oldest first.
    log: BTreeMap<u64, Vec<QuantizedTile>>,
    /// Latest tile of every key.
    current: BTreeMap<TileKey, QuantizedTile>,
    /// Full-precision dB values the current tiles were encoded from.
    reference: Option<BandGrid>,
}

/// Result of an incremental update.
#[derive(Debug, Clone, PartialEq)]
pub struct TileUpdate {
    pub epoch: u64,
    pub updated: Vec<TileKey>,
    pub fraction_changed: f64,
}

const INDEX_FILE: &str = "tiling.toml";

impl TileStore {
    pub fn new(tiling: Tiling) -> Self {
        TileStore {
            tiling,
            log: BTreeMap::new(),
            current: BTreeMap::new(),
            reference: None,
        }
    }

    pub fn tiling(&self) -> &Tiling {
        &self.tiling
    }

    pub fn epochs(&self) -> Vec<u64> {
        self.log.keys().copied().collect()
    }

    pub fn delta(&self, epoch: u64) -> Option<&[QuantizedTile]> {
        self.log.get(&epoch).map(Vec::as_slice)
    }

    pub fn current_tiles(&self) -> Vec<QuantizedTile> {
        self.current.values().cloned().collect()
    }

    pub fn tile(&self, key: TileKey) -> Option<&QuantizedTile> {
        self.current.get(&key)
    }

    /// Re-encodes the tiles of `new_map` whose largest cell-wise change
    /// against the values they were last encoded from exceeds
    /// `change_threshold_db`. The first update encodes every tile.
    pub fn incremental_update(&mut self, epoch: u64, new_map: &BandGrid, change_threshold_db: f64) -> Result<TileUpdate> {
        self.tiling.check_map(new_map)?;
        if let Some(&last) = self.log.keys().next_back() {
            if epoch <= last {
                return Err(Error::InvalidInput(format!("epoch {epoch} not after {last}")));
            }
        }
        let new_db = new_map.to_db();
        let keys = self.tiling.keys();
        let mut updated = Vec::new();
        let mut reference: Vec<Vec<f64>> = match &self.reference {
            Some(r) => r.grids().iter().map(|g| g.values().to_vec()).collect(),
            None => new_db.grids().iter().map(|g| g.values().to_vec()).collect(),
        };
        let g = self.tiling.layout.geometry;
        for &key in &keys {
            let fresh = self.tiling.cut(new_db.channel(key.channel), key);
            let changed = match &self.reference {
                None => true,
                Some(r) => {
                    let old = self.tiling.cut(r.channel(key.channel), key);
                    old.iter()
                        .zip(&fresh)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                        > change_threshold_db
                }
            };
            if changed {
                let (r0, nr, c0, nc) = self.tiling.extent(key);
                for (i, v) in fresh.iter().enumerate() {
                    reference[key.channel][g.index(r0 + i / nc, c0 + i % nc)] = *v;
                }
                updated.push(key);
                let t = QuantizedTile::encode(key, &fresh, nr, nc, self.tiling.n_bits)?;
                self.current.insert(key, t);
            }
        }
        let grids = reference
            .into_iter()
            .map(|v| Grid2D::new(g, v, Unit::Db))
            .collect::<Result<Vec<_>>>()?;
        self.reference = Some(new_db.with_grids(grids));
        self.log.insert(epoch, updated.iter().map(|k| self.current[k].clone()).collect());
        Ok(TileUpdate {
            epoch,
            fraction_changed: updated.len() as f64 / keys.len() as f64,
            updated,
        })
    }

    /// Map as of `epoch`, replaying deltas up to and including it.
    pub fn reconstruct(&self, epoch: u64) -> Result<BandGrid> {
        let mut state = BTreeMap::new();
        for (_, delta) in self.log.range(..=epoch) {
            for t in delta {
                state.insert(t.key, t.clone());
            }
        }
        self.tiling.assemble(&state)
    }

    /// Writes `tiling.toml` and `epoch_<t>/chan_<k>/tile_<r>_<c>.bin`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let index = toml::to_string(&self.tiling).map_err(|e| Error::Config(e.to_string()))?;
        let p = dir.join(INDEX_FILE);
        fs::write(&p, index).map_err(|e| Error::io(&p, e))?;
        for (epoch, delta) in &self.log {
            for t in delta {
                let sub = dir.join(format!("epoch_{epoch}")).join(format!("chan_{}", t.key.channel));
                fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
                let f = sub.join(format!("tile_{}_{}.bin", t.key.row, t.key.col));
                fs::write(&f, t.to_bytes()).map_err(|e| Error::io(&f, e))?;
            }
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let p = dir.join(INDEX_FILE);
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let tiling: Tiling = toml::from_str(&text).map_err(|e| Error::Tile(format!("{}: {e}", p.display())))?;
        let tiling = Tiling::new(tiling.layout, tiling.tile_size, tiling.n_bits)?;
        let mut store = TileStore::new(tiling);

        let mut epochs = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(t) = name.strip_prefix("epoch_") {
                let t: u64 = t.parse().map_err(|_| Error::Tile(format!("bad epoch directory {name}")))?;
                epochs.push((t, entry.path()));
            }
        }
        epochs.sort();
        for (epoch, path) in epochs {
            let mut delta = Vec::new();
            for ch in fs::read_dir(&path).map_err(|e| Error::io(&path, e))? {
                let ch = ch.map_err(|e| Error::io(&path, e))?;
                let cname = ch.file_name().to_string_lossy().into_owned();
                let channel: usize = cname
                    .strip_prefix("chan_")
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::Tile(format!("bad channel directory {cname}")))?;
                for tf in fs::read_dir(ch.path()).map_err(|e| Error::io(ch.path(), e))? {
                    let tf = tf.map_err(|e| Error::io(ch.path(), e))?;
                    let tname = tf.file_name().to_string_lossy().into_owned();
                    let (row, col) = tname
                        .strip_prefix("tile_")
                        .and_then(|s| s.strip_suffix(".bin"))
                        .and_then(|s| s.split_once('_'))
                        .and_then(|(r, c)| Some((r.parse().ok()?, c.parse().ok()?)))
                        .ok_or_else(|| Error::Tile(format!("bad tile file name {tname}")))?;
                    let key = TileKey { channel, row, col };
                    if key.channel >= store.tiling.layout.n_channels()
                        || row >= store.tiling.tile_rows()
                        || col >= store.tiling.tile_cols()
                    {
                        return Err(Error::Tile(format!("tile {key:?} outside the tiling")));
                    }
                    let bytes = fs::read(tf.path()).map_err(|e| Error::io(tf.path(), e))?;
                    delta.push(QuantizedTile::from_bytes(key, &bytes)?);
                }
            }
            delta.sort_by_key(|t| t.key);
            for t in &delta {
                store.current.insert(t.key, t.clone());
            }
            store.log.insert(epoch, delta);
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Geometry;
    use proptest::prelude::*;

    fn key() -> TileKey {
        TileKey { channel: 0, row: 0, col: 0 }
    }

    fn band(f: impl Fn(usize, usize) -> f64, rows: usize, cols: usize) -> BandGrid {
        let g = Geometry::new(0.0, 0.0, 10.0, rows, cols).unwrap();
        let grid = Grid2D::from_fn(g, Unit::Db, |r, c, _, _| f(r, c)).unwrap();
        BandGrid::single(grid, 100e6, 1e6).unwrap()
    }

    #[test]
    fn constant_tile_is_exact() {
        let t = QuantizedTile::encode(key(), &[-71.25; 64], 8, 8, 8).unwrap();
        assert!(t.decode().iter().all(|&v| v == -71.25));
        assert_eq!(t.error_bound(), 0.0);
    }

    #[test]
    fn span_120_db_at_8_bits() {
        let v: Vec<f64> = (0..256).map(|i| -150.0 + 120.0 * (i as f64 * 0.618).fract()).chain([-150.0, -30.0]).collect();
        let t = QuantizedTile::encode(key(), &v[..256], 16, 16, 8).unwrap();
        let max_err = t.decode().iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max_err <= 120.0 / 256.0 / 2.0, "{max_err}");
    }

    #[test]
    fn idempotent() {
        let m = band(|r, c| -90.0 + (r * 7 + c * 3) as f64 * 0.37 + ((r * c) as f64).sin(), 30, 21);
        let (tiling, a) = quantize_tiles(&m, 5, 8).unwrap();
        let back = dequantize_tiles(&tiling, &a).unwrap();
        let (_, b) = quantize_tiles(&back, 5, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(back.geometry(), m.geometry());
    }

    #[test]
    fn bytes_round_trip_and_layout() {
        let v: Vec<f64> = (0..63).map(|i| i as f64).collect();
        let t = QuantizedTile::encode(TileKey { channel: 2, row: 1, col: 3 }, &v, 7, 9, 3).unwrap();
        let bytes = t.to_bytes();
        assert_eq!(&bytes[..4], b"RMKT");
        assert_eq!(bytes.len(), 32 + (63 * 3usize).div_ceil(8));
        assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()), 7);
        assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), 62.0);
        assert_eq!(QuantizedTile::from_bytes(t.key, &bytes).unwrap(), t);
        assert!(QuantizedTile::from_bytes(t.key, &bytes[..40]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(QuantizedTile::from_bytes(t.key, &bad).is_err());
    }

    #[test]
    fn lsb_first_packing() {
        let t = QuantizedTile::encode(key(), &[0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0], 1, 8, 1).unwrap();
        assert_eq!(t.to_bytes()[32], 0b1111_1010);
    }

    #[test]
    fn parameter_checks() {
        assert!(QuantizedTile::encode(key(), &[0.0], 1, 1, 0).is_err());
        assert!(QuantizedTile::encode(key(), &[0.0], 1, 1, 17).is_err());
        let m = band(|_, _| 0.0, 10, 10);
        assert!(quantize_tiles(&m, 8, 7).is_err());
    }

    #[test]
    fn identical_map_updates_nothing() {
        let m = band(|r, c| (r + c) as f64, 32, 32);
        let mut s = TileStore::new(Tiling::new(m.layout(), 8, 8).unwrap());
        assert_eq!(s.incremental_update(0, &m, 0.5).unwrap().fraction_changed, 1.0);
        let u = s.incremental_update(1, &m, 0.5).unwrap();
        assert!(u.updated.is_empty());
        assert_eq!(u.fraction_changed, 0.0);
    }

    #[test]
    fn single_cell_change_updates_one_tile() {
        let m = band(|r, c| (r * c) as f64 * 0.01, 32, 32);
        let bumped = band(|r, c| (r * c) as f64 * 0.01 + if (r, c) == (13, 21) { 10.0 } else { 0.0 }, 32, 32);
        let mut s = TileStore::new(Tiling::new(m.layout(), 8, 8).unwrap());
        s.incremental_update(0, &m, 1.0).unwrap();
        let u = s.incremental_update(1, &bumped, 1.0).unwrap();
        assert_eq!(u.updated, vec![TileKey { channel: 0, row: 1, col: 2 }]);
        assert_eq!(u.fraction_changed, 1.0 / 16.0);
    }

    #[test]
    fn full_update_equals_fresh_quantization() {
        let a = band(|r, c| (r + c) as f64, 20, 20);
        let b = band(|r, c| (r as f64).sin() * 10.0 - c as f64, 20, 20);
        let mut s = TileStore::new(Tiling::new(a.layout(), 8, 6).unwrap());
        s.incremental_update(0, &a, 0.0).unwrap();
        s.incremental_update(1, &b, -1.0).unwrap();
        let (_, fresh) = quantize_tiles(&b, 6, 8).unwrap();
        assert_eq!(s.current_tiles(), fresh);
        assert_eq!(s.reconstruct(1).unwrap(), dequantize_tiles(s.tiling(), &fresh).unwrap());
    }

    #[test]
    fn store_round_trips_through_disk() {
        let a = band(|r, c| (r + c) as f64, 20, 20);
        let b = band(|r, c| (r + c) as f64 + if r < 5 && c < 5 { 3.0 } else { 0.0 }, 20, 20);
        let mut s = TileStore::new(Tiling::new(a.layout(), 8, 8).unwrap());
        s.incremental_update(4, &a, 1.0).unwrap();
        s.incremental_update(9, &b, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        s.write_dir(dir.path()).unwrap();
        assert!(dir.path().join("epoch_9/chan_0/tile_0_0.bin").exists());
        assert!(!dir.path().join("epoch_9/chan_0/tile_1_1.bin").exists());
        let back = TileStore::read_dir(dir.path()).unwrap();
        assert_eq!(back, TileStore { reference: None, ..s.clone() });
        assert_eq!(back.reconstruct(4).unwrap(), s.reconstruct(4).unwrap());
        assert_eq!(back.reconstruct(9).unwrap(), s.reconstruct(9).unwrap());
    }

    proptest! {
        #[test]
        fn error_bound_holds(n_bits in 1u8..=16, vals in proptest::collection::vec(-200.0f64..50.0, 64)) {
            let t = QuantizedTile::encode(key(), &vals, 8, 8, n_bits).unwrap();
            let bound = (t.db_max - t.db_min) / (1u64 << n_bits) as f64;
            for (a, b) in t.decode().iter().zip(&vals) {
                prop_assert!((a - b).abs() <= bound * (1.0 + 1e-12) + 1e-12);
                prop_assert!((a - b).abs() <= t.error_bound() * (1.0 + 1e-9) + 1e-12);
            }
            prop_assert!(t.codes.iter().all(|&c| (c as u32) < (1u32 << n_bits)));
        }
    }
}
