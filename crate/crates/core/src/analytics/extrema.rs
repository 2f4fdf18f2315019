//! Local extrema and finite-difference derivatives of a field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Grid2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub row: usize,
    pub col: usize,
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// Cells strictly above (or below) every existing 8-neighbour, strongest
/// first, with weaker extrema within `min_separation_cells` (Euclidean,
/// in cells) of a kept one suppressed.
pub fn local_extrema(map: &Grid2D, kind: ExtremumKind, min_separation_cells: f64) -> Result<Vec<Extremum>> {
    let (nr, nc) = (map.n_rows(), map.n_cols());
    if nr < 3 || nc < 3 {
        return Err(Error::InvalidInput(format!("extrema need at least 3×3 cells, got {nr}×{nc}")));
    }
    let sign = match kind {
        ExtremumKind::Max => 1.0,
        ExtremumKind::Min => -1.0,
    };
    let mut found = Vec::new();
    for r in 0..nr {
        for c in 0..nc {
            let v = sign * map.get(r, c);
            let mut strict = true;
            'nb: for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    if rr < 0 || cc < 0 || rr >= nr as i64 || cc >= nc as i64 {
                        continue;
                    }
                    if sign * map.get(rr as usize, cc as usize) >= v {
                        strict = false;
                        break 'nb;
                    }
                }
            }
            if strict {
                found.push((r, c));
            }
        }
    }
    // strongest first; row-major order on ties
    found.sort_by(|a, b| (sign * map.get(b.0, b.1)).total_cmp(&(sign * map.get(a.0, a.1))).then(a.cmp(b)));
    let mut kept: Vec<Extremum> = Vec::new();
    for (r, c) in found {
        let close = kept.iter().any(|k| {
            ((k.row as f64 - r as f64).powi(2) + (k.col as f64 - c as f64).powi(2)).sqrt() <= min_separation_cells
        });
        if !close {
            let (x, y) = map.geometry().cell_center(r, c);
            kept.push(Extremum { row: r, col: c, x, y, value: map.get(r, c) });
        }
    }
    Ok(kept)
}

/// Central-difference gradient `(∂f/∂x, ∂f/∂y)` of `f` at `(x, y)` with
/// step `h`.
pub fn central_difference(f: impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> (f64, f64) {
    (
        (f(x + h, y) - f(x - h, y)) / (2.0 * h),
        (f(x, y + h) - f(x, y - h)) / (2.0 * h),
    )
}

/// Cell-wise gradient of the dB field, `(∂/∂x, ∂/∂y)` in dB per meter with
/// `y` pointing north: central differences inside, second-order one-sided
/// stencils on the border.
pub fn gradient(map: &Grid2D) -> Result<(Grid2D, Grid2D)> {
    let map = &map.to_db();
    let (nr, nc) = (map.n_rows(), map.n_cols());
    if nr < 3 || nc < 3 {
        return Err(Error::InvalidInput(format!("gradient needs at least 3×3 cells, got {nr}×{nc}")));
    }
    let h = map.geometry().cell_size;
    let d = |a: f64, b: f64, c: f64, i: usize, n: usize| -> f64 {
        // a, b, c are the values at i−1, i, i+1 (or the one-sided triple)
        if i == 0 {
            (-3.0 * a + 4.0 * b - c) / (2.0 * h)
        } else if i == n - 1 {
            (a - 4.0 * b + 3.0 * c) / (2.0 * h)
        } else {
            (c - a) / (2.0 * h)
        }
    };
    let col_triple = |r: usize, c: usize| -> (f64, f64, f64) {
        let c0 = c.clamp(1, nc - 2);
        (map.get(r, c0 - 1), map.get(r, c0), map.get(r, c0 + 1))
    };
    // rows run north to south: walk them bottom-up so the triple follows +y
    let row_triple = |r: usize, c: usize| -> (f64, f64, f64) {
        let r0 = r.clamp(1, nr - 2);
        (map.get(r0 + 1, c), map.get(r0, c), map.get(r0 - 1, c))
    };
    let gx = Grid2D::from_fn(*map.geometry(), map.unit(), |r, c, _, _| {
        let (a, b, cc) = col_triple(r, c);
        d(a, b, cc, c, nc)
    })?;
    let gy = Grid2D::from_fn(*map.geometry(), map.unit(), |r, c, _, _| {
        let (a, b, cc) = row_triple(r, c);
        // index along +y: south edge is row nr−1
        d(a, b, cc, nr - 1 - r, nr)
    })?;
    Ok((gx, gy))
}
