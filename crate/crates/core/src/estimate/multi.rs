//! Model-based reconstruction with several co-channel transmitters.
//!
//! Pipeline: greedy seeding on the strongest measurements, nearest-seed
//! partition of the sensors, successive per-cell path-loss fits with the
//! already-fitted transmitters subtracted in the linear domain, then a few
//! backfitting sweeps in which every transmitter is refitted against the
//! current estimate of all the others. The map is the linear superposition
//! of the fitted transmitters.

use super::pathloss::{fit_pathloss_single, Bounds, PathLossFit};
use crate::error::{Error, Result};
use crate::field::{db_to_watts, watts_to_db, Geometry, Grid2D, Unit, LINEAR_FLOOR};
use crate::sensing::Sample;

/// Upper bound on backfitting sweeps after the successive pass.
pub const BACKFIT_SWEEPS: usize = 8;
/// Minimum samples handed to a single-transmitter fit.
const MIN_CELL: usize = 4;

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Seed positions: repeatedly take the strongest remaining sample and
/// suppress everything within `diameter / (2√n_tx)`. If fewer than `n_tx`
/// maxima survive, the strongest unused samples fill the gap.
pub fn seed_positions(samples: &[Sample], n_tx: usize, geometry: &Geometry) -> Vec<(f64, f64)> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[b].value.total_cmp(&samples[a].value).then(a.cmp(&b)));
    let radius = geometry.diameter() / (2.0 * (n_tx as f64).sqrt());

    let mut taken = vec![false; samples.len()];
    let mut suppressed = vec![false; samples.len()];
    let mut seeds = Vec::with_capacity(n_tx);
    for &i in &order {
        if seeds.len() == n_tx {
            break;
        }
        if suppressed[i] {
            continue;
        }
        taken[i] = true;
        let p = (samples[i].x, samples[i].y);
        seeds.push(p);
        for (j, s) in samples.iter().enumerate() {
            if dist(p, (s.x, s.y)) < radius {
                suppressed[j] = true;
            }
        }
    }
    for &i in &order {
        if seeds.len() == n_tx {
            break;
        }
        if !taken[i] {
            taken[i] = true;
            seeds.push((samples[i].x, samples[i].y));
        }
    }
    seeds
}

/// Nearest-seed assignment; ties go to the lower seed index.
pub fn voronoi_partition(samples: &[Sample], seeds: &[(f64, f64)]) -> Vec<Vec<usize>> {
    let mut cells = vec![Vec::new(); seeds.len()];
    for (i, s) in samples.iter().enumerate() {
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (k, &p) in seeds.iter().enumerate() {
            let d = dist(p, (s.x, s.y));
            if d < bd {
                bd = d;
                best = k;
            }
        }
        cells[best].push(i);
    }
    cells
}

/// Pads `cell` with the samples nearest to `seed` until it holds at least
/// [`MIN_CELL`] entries.
fn augment(samples: &[Sample], cell: &[usize], seed: (f64, f64)) -> Vec<usize> {
    if cell.len() >= MIN_CELL {
        return cell.to_vec();
    }
    let mut rest: Vec<usize> = (0..samples.len()).filter(|i| !cell.contains(i)).collect();
    rest.sort_by(|&a, &b| {
        dist(seed, (samples[a].x, samples[a].y))
            .total_cmp(&dist(seed, (samples[b].x, samples[b].y)))
            .then(a.cmp(&b))
    });
    let mut out = cell.to_vec();
    out.extend(rest.into_iter().take(MIN_CELL - cell.len()));
    out
}

/// Cell samples with the linear power of `others` removed, floored.
fn residual_samples(samples: &[Sample], cell: &[usize], others: &[PathLossFit], d_min: f64) -> Vec<Sample> {
    if others.is_empty() {
        return cell.iter().map(|&i| samples[i]).collect();
    }
    cell.iter()
        .map(|&i| {
            let s = samples[i];
            let interference: f64 = others.iter().map(|f| db_to_watts(f.predict_db(s.x, s.y, d_min))).sum();
            let left = (db_to_watts(s.value) - interference).max(LINEAR_FLOOR);
            Sample {
                value: watts_to_db(left),
                ..s
            }
        })
        .collect()
}

/// Fits `n_tx` transmitters to dB samples over `geometry`.
///
/// With `n_tx == 1` this is exactly [`fit_pathloss_single`] over all samples
/// initialised at the strongest measurement.
pub fn fit_model_based(samples: &[Sample], n_tx: usize, geometry: &Geometry) -> Result<Vec<PathLossFit>> {
    if n_tx == 0 {
        return Err(Error::InvalidInput("n_tx must be at least 1".into()));
    }
    if samples.len() < MIN_CELL {
        return Err(Error::EmptyMeasurements(format!(
            "model-based fit needs at least {MIN_CELL} measurements, got {}",
            samples.len()
        )));
    }
    let bounds = Bounds::of(geometry);
    let d_min = geometry.cell_size / 2.0;
    let seeds = seed_positions(samples, n_tx, geometry);
    let cells: Vec<Vec<usize>> = voronoi_partition(samples, &seeds)
        .iter()
        .zip(&seeds)
        .map(|(c, &s)| augment(samples, c, s))
        .collect();

    let mut fits: Vec<PathLossFit> = Vec::with_capacity(n_tx);
    for (k, cell) in cells.iter().enumerate() {
        let data = residual_samples(samples, cell, &fits, d_min);
        fits.push(fit_pathloss_single(&data, seeds[k], bounds, d_min)?);
    }
    if n_tx == 1 {
        return Ok(fits);
    }

    for _ in 0..BACKFIT_SWEEPS {
        let mut moved = 0.0f64;
        for k in 0..n_tx {
            let others: Vec<PathLossFit> = fits.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, f)| *f).collect();
            let data = residual_samples(samples, &cells[k], &others, d_min);
            let f = fit_pathloss_single(&data, (fits[k].x, fits[k].y), bounds, d_min)?;
            moved = moved.max(dist((f.x, f.y), (fits[k].x, fits[k].y)));
            fits[k] = f;
        }
        if moved < 1e-3 * geometry.cell_size {
            break;
        }
    }
    Ok(fits)
}

/// Linear superposition of the fitted transmitters, in dB.
pub fn model_based_map(fits: &[PathLossFit], geometry: &Geometry) -> Result<Grid2D> {
    let d_min = geometry.cell_size / 2.0;
    Grid2D::from_fn(*geometry, Unit::Db, |_, _, x, y| {
        watts_to_db(fits.iter().map(|f| db_to_watts(f.predict_db(x, y, d_min))).sum())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo() -> Geometry {
        Geometry::new(0.0, 0.0, 100.0, 100, 100).unwrap()
    }

    fn lattice(n: usize) -> Vec<(f64, f64)> {
        let step = 10_000.0 / n as f64;
        (0..n * n)
            .map(|k| ((k % n) as f64 * step + step / 2.0, (k / n) as f64 * step + step / 2.0))
            .collect()
    }

    // (x, y, P_ref, η)
    const TX: [(f64, f64, f64, f64); 3] = [
        (2_030.0, 2_470.0, -30.0, 3.0),
        (7_610.0, 3_080.0, -32.0, 3.2),
        (4_720.0, 7_950.0, -29.0, 2.8),
    ];

    fn truth_db(x: f64, y: f64, d_min: f64) -> f64 {
        watts_to_db(
            TX.iter()
                .map(|&(tx, ty, p, e)| db_to_watts(p - 10.0 * e * (x - tx).hypot(y - ty).max(d_min).log10()))
                .sum(),
        )
    }

    fn samples() -> Vec<Sample> {
        lattice(15)
            .into_iter()
            .map(|(x, y)| Sample {
                x,
                y,
                value: truth_db(x, y, 50.0),
            })
            .collect()
    }

    #[test]
    fn single_transmitter_matches_direct_fit() {
        let s: Vec<Sample> = lattice(12)
            .into_iter()
            .map(|(x, y)| Sample {
                x,
                y,
                value: -30.0 - 30.0 * (x - 4_100.0).hypot(y - 5_900.0).max(50.0).log10(),
            })
            .collect();
        let fits = fit_model_based(&s, 1, &geo()).unwrap();
        // strongest sample, lowest index on ties
        let mut best = 0;
        for (i, p) in s.iter().enumerate() {
            if p.value > s[best].value {
                best = i;
            }
        }
        let direct = fit_pathloss_single(&s, (s[best].x, s[best].y), Bounds::of(&geo()), 50.0).unwrap();
        assert_eq!(fits, vec![direct]);
    }

    #[test]
    fn three_separated_transmitters_recovered() {
        let fits = fit_model_based(&samples(), 3, &geo()).unwrap();
        for &(tx, ty, _, eta) in &TX {
            let f = fits
                .iter()
                .min_by(|a, b| dist((a.x, a.y), (tx, ty)).total_cmp(&dist((b.x, b.y), (tx, ty))))
                .unwrap();
            assert!(dist((f.x, f.y), (tx, ty)) <= 200.0, "{f:?} vs ({tx},{ty})");
            assert!(((f.exponent - eta) / eta).abs() <= 0.05, "{f:?} vs η={eta}");
        }
    }

    #[test]
    fn reconstruction_rmse_outside_transmitter_disks() {
        let g = geo();
        let fits = fit_model_based(&samples(), 3, &g).unwrap();
        let map = model_based_map(&fits, &g).unwrap();
        let (mut se, mut n) = (0.0, 0usize);
        for r in 0..g.n_rows {
            for c in 0..g.n_cols {
                let (x, y) = g.cell_center(r, c);
                if TX.iter().any(|&(tx, ty, _, _)| dist((x, y), (tx, ty)) <= g.cell_size) {
                    continue;
                }
                se += (map.get(r, c) - truth_db(x, y, 50.0)).powi(2);
                n += 1;
            }
        }
        let rmse = (se / n as f64).sqrt();
        assert!(rmse <= 1.0, "rmse {rmse}");
    }

    #[test]
    fn seeding_falls_back_to_strongest() {
        // all samples within one suppression radius
        let s: Vec<Sample> = (0..6)
            .map(|k| Sample {
                x: 5_000.0 + k as f64,
                y: 5_000.0,
                value: -50.0 - k as f64,
            })
            .collect();
        let seeds = seed_positions(&s, 3, &geo());
        assert_eq!(seeds, vec![(5_000.0, 5_000.0), (5_001.0, 5_000.0), (5_002.0, 5_000.0)]);
    }

    #[test]
    fn partition_ties_go_to_lower_index() {
        let s = [Sample { x: 5.0, y: 0.0, value: 0.0 }];
        let cells = voronoi_partition(&s, &[(0.0, 0.0), (10.0, 0.0)]);
        assert_eq!(cells, vec![vec![0], vec![]]);
    }

    #[test]
    fn small_cells_are_augmented() {
        let s: Vec<Sample> = (0..10).map(|k| Sample { x: k as f64 * 100.0, y: 0.0, value: 0.0 }).collect();
        let a = augment(&s, &[9], (900.0, 0.0));
        assert_eq!(a, vec![9, 8, 7, 6]);
    }
}
