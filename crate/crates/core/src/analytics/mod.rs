//! Evaluation of estimates and map-assisted applications.

pub mod anomaly;
pub mod coverage;
pub mod extrema;

pub use anomaly::{detect_anomaly, detect_anomaly_in, locate_rogue, AnomalyReport, Cluster, RogueEstimate};
pub use coverage::{dead_zones, sinr_along_route, sinr_at, total_power, Coverage, Route};
pub use extrema::{central_difference, gradient, local_extrema, Extremum, ExtremumKind};

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BandGrid, Geometry, Grid2D, Unit};

/// dB error statistics of an estimate against the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub rmse_db: f64,
    pub mae_db: f64,
    pub max_abs_db: f64,
    /// Number of cells (over all channels) that entered the statistics.
    pub n_cells: usize,
    /// Signed per-cell error `estimate − truth`, dB.
    pub errors: BandGrid,
    /// Cells left out of the statistics, if any exclusion was requested.
    pub excluded: Option<Vec<bool>>,
}

/// Scalar part of an [`ErrorReport`], for text reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub rmse_db: f64,
    pub mae_db: f64,
    pub max_abs_db: f64,
    pub n_cells: usize,
}

impl ErrorReport {
    pub fn summary(&self) -> ErrorSummary {
        ErrorSummary {
            rmse_db: self.rmse_db,
            mae_db: self.mae_db,
            max_abs_db: self.max_abs_db,
            n_cells: self.n_cells,
        }
    }
}

/// Cells whose centers lie within `radius_cells` cell sizes of any of
/// `centers`.
pub fn disk_mask(geometry: &Geometry, centers: &[(f64, f64)], radius_cells: f64) -> Vec<bool> {
    let radius = radius_cells * geometry.cell_size;
    (0..geometry.n_cells())
        .map(|i| {
            let (x, y) = geometry.cell_center(i / geometry.n_cols, i % geometry.n_cols);
            centers.iter().any(|&(cx, cy)| (x - cx).hypot(y - cy) <= radius)
        })
        .collect()
}

/// dB-domain comparison over all channels. Cells within
/// `exclusion_radius_cells` of any point in `exclude_around` are skipped.
pub fn compare_maps(
    estimate: &BandGrid,
    truth: &BandGrid,
    exclude_around: &[(f64, f64)],
    exclusion_radius_cells: f64,
) -> Result<ErrorReport> {
    estimate.geometry().ensure_same(truth.geometry())?;
    if estimate.n_channels() != truth.n_channels() {
        return Err(Error::GeometryMismatch(format!(
            "{} vs {} channels",
            estimate.n_channels(),
            truth.n_channels()
        )));
    }
    let geo = *estimate.geometry();
    let excluded = (!exclude_around.is_empty()).then(|| disk_mask(&geo, exclude_around, exclusion_radius_cells));
    let (est, tru) = (estimate.to_db(), truth.to_db());
    let (mut se, mut ae, mut mx, mut n) = (0.0, 0.0, 0.0f64, 0usize);
    let mut grids = Vec::with_capacity(est.n_channels());
    for (ge, gt) in est.grids().iter().zip(tru.grids()) {
        let diff: Vec<f64> = ge.values().iter().zip(gt.values()).map(|(a, b)| a - b).collect();
        for (i, &d) in diff.iter().enumerate() {
            if excluded.as_ref().is_some_and(|m| m[i]) {
                continue;
            }
            se += d * d;
            ae += d.abs();
            mx = mx.max(d.abs());
            n += 1;
        }
        grids.push(Grid2D::new(geo, diff, Unit::Db)?);
    }
    if n == 0 {
        return Err(Error::InvalidInput("every cell is excluded".into()));
    }
    Ok(ErrorReport {
        rmse_db: (se / n as f64).sqrt(),
        mae_db: ae / n as f64,
        max_abs_db: mx,
        n_cells: n,
        errors: est.with_grids(grids),
        excluded,
    })
}

/// Half-open rectangle `[x_min, x_max) × [y_min, y_max)` in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Region {
    pub fn whole(g: &Geometry) -> Self {
        Region {
            x_min: g.origin_x,
            y_min: g.origin_y,
            x_max: g.x_max(),
            y_max: g.y_max(),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }
}

/// Power-area integral (W·m²) of the linear map over the cells whose
/// centers fall in `region`, summed over `channels` (clipped to the band).
pub fn integrate_field(map: &BandGrid, region: Region, channels: Range<usize>) -> Result<f64> {
    let channels = channels.start..channels.end.min(map.n_channels());
    if channels.is_empty() {
        return Err(Error::InvalidInput("no channel selected".into()));
    }
    let geo = *map.geometry();
    let cells: Vec<usize> = (0..geo.n_cells())
        .filter(|&i| {
            let (x, y) = geo.cell_center(i / geo.n_cols, i % geo.n_cols);
            region.contains(x, y)
        })
        .collect();
    if cells.is_empty() {
        return Err(Error::InvalidInput(format!("region {region:?} covers no cell")));
    }
    let lin = map.from_db();
    let mut total = 0.0;
    for k in channels {
        let v = lin.channel(k).values();
        total += cells.iter().map(|&i| v[i]).sum::<f64>();
    }
    Ok(total * geo.cell_area())
}

/// 4-connected components of `mask`, each listed in row-major order;
/// components are ordered by their first cell.
pub fn components(geometry: &Geometry, mask: &[bool]) -> Vec<Vec<usize>> {
    let (nr, nc) = (geometry.n_rows, geometry.n_cols);
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(i) = stack.pop() {
            comp.push(i);
            let (r, c) = (i / nc, i % nc);
            let mut push = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if r > 0 {
                push(i - nc);
            }
            if r + 1 < nr {
                push(i + nc);
            }
            if c > 0 {
                push(i - 1);
            }
            if c + 1 < nc {
                push(i + 1);
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// 0/1 raster of a mask, for export.
pub fn mask_grid(geometry: &Geometry, mask: &[bool]) -> Result<Grid2D> {
    Grid2D::new(*geometry, mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(), Unit::Db)
}
