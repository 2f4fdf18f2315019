//! Deviation of the current map from its history, and rogue localisation.

use serde::{Deserialize, Serialize};

use super::components;
use crate::error::{Error, Result};
use crate::field::{db_to_watts, BandGrid, Grid2D, Unit};
use crate::temporal::MapSeries;

/// Floor on the per-cell historical standard deviation, dB.
pub const STD_FLOOR_DB: f64 = 0.5;
pub const MIN_HISTORY: usize = 3;

/// 4-connected group of flagged cells on one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub channel: usize,
    /// Row-major cell indices.
    pub cells: Vec<usize>,
    /// Mean of the cell centers.
    pub centroid: (f64, f64),
    /// Mean of `current − baseline` over the cells, dB.
    pub mean_deviation_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyReport {
    pub k_sigma: f64,
    /// Per-cell historical mean, dB.
    pub baseline_db: BandGrid,
    /// Per-cell z-scores (stored in a dB-tagged grid).
    pub z: BandGrid,
    /// Per channel, row-major flags `|z| > k_sigma`.
    pub flagged: Vec<Vec<bool>>,
    pub clusters: Vec<Cluster>,
}

impl AnomalyReport {
    pub fn n_flagged(&self) -> usize {
        self.flagged.iter().flatten().filter(|&&f| f).count()
    }
}

/// Z-test of `current` against the per-cell dB mean and standard deviation
/// of `history` (at least three maps).
pub fn detect_anomaly_in(history: &[&BandGrid], current: &BandGrid, k_sigma: f64) -> Result<AnomalyReport> {
    if history.len() < MIN_HISTORY {
        return Err(Error::EmptyMeasurements(format!(
            "anomaly detection needs {MIN_HISTORY} historical maps, got {}",
            history.len()
        )));
    }
    if !(k_sigma > 0.0) {
        return Err(Error::InvalidInput(format!("k_sigma must be positive, got {k_sigma}")));
    }
    for h in history {
        h.geometry().ensure_same(current.geometry())?;
        if h.n_channels() != current.n_channels() {
            return Err(Error::GeometryMismatch("channel count differs from history".into()));
        }
    }
    let geo = *current.geometry();
    let cur = current.to_db();
    let hist: Vec<BandGrid> = history.iter().map(|h| h.to_db()).collect();
    let n = hist.len() as f64;

    let mut means = Vec::new();
    let mut zs = Vec::new();
    let mut flagged = Vec::new();
    let mut clusters = Vec::new();
    for k in 0..cur.n_channels() {
        let cells = geo.n_cells();
        let mut mean = vec![0.0; cells];
        let mut z = vec![0.0; cells];
        for i in 0..cells {
            let m = hist.iter().map(|h| h.channel(k).values()[i]).sum::<f64>() / n;
            let var = hist.iter().map(|h| (h.channel(k).values()[i] - m).powi(2)).sum::<f64>() / (n - 1.0);
            mean[i] = m;
            z[i] = (cur.channel(k).values()[i] - m) / var.sqrt().max(STD_FLOOR_DB);
        }
        let flags: Vec<bool> = z.iter().map(|v| v.abs() > k_sigma).collect();
        for comp in components(&geo, &flags) {
            let (mut sx, mut sy, mut dev) = (0.0, 0.0, 0.0);
            for &i in &comp {
                let (x, y) = geo.cell_center(i / geo.n_cols, i % geo.n_cols);
                sx += x;
                sy += y;
                dev += cur.channel(k).values()[i] - mean[i];
            }
            let c = comp.len() as f64;
            clusters.push(Cluster {
                channel: k,
                centroid: (sx / c, sy / c),
                mean_deviation_db: dev / c,
                cells: comp,
            });
        }
        means.push(Grid2D::new(geo, mean, Unit::Db)?);
        zs.push(Grid2D::new(geo, z, Unit::Db)?);
        flagged.push(flags);
    }
    Ok(AnomalyReport {
        k_sigma,
        baseline_db: cur.with_grids(means),
        z: cur.with_grids(zs),
        flagged,
        clusters,
    })
}

/// [`detect_anomaly_in`] against every estimate committed to `history`.
pub fn detect_anomaly(history: &MapSeries, current: &BandGrid, k_sigma: f64) -> Result<AnomalyReport> {
    let maps: Vec<&BandGrid> = history.times().iter().filter_map(|&t| history.estimate_at(t)).collect();
    detect_anomaly_in(&maps, current, k_sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RogueEstimate {
    pub channel: usize,
    pub x: f64,
    pub y: f64,
    /// Power-area integral of the linear excess over the cluster, W·m².
    pub excess_power: f64,
    pub n_cells: usize,
}

/// Locates the strongest positive cluster: its position is the centroid
/// weighted by linear excess power `max(P_current − P_baseline, 0)`. Clusters
/// of equal excess go to the one whose first cell comes first (channel, then
/// row-major).
pub fn locate_rogue(report: &AnomalyReport, current: &BandGrid) -> Result<RogueEstimate> {
    current.geometry().ensure_same(report.baseline_db.geometry())?;
    let geo = *current.geometry();
    let cur = current.to_db();
    let mut best: Option<(f64, &Cluster)> = None;
    for c in report.clusters.iter().filter(|c| c.mean_deviation_db > 0.0) {
        let mass: f64 = c
            .cells
            .iter()
            .map(|&i| excess(cur.channel(c.channel).values()[i], report.baseline_db.channel(c.channel).values()[i]))
            .sum();
        let better = match best {
            None => true,
            Some((m, _)) => mass > m * (1.0 + 1e-12),
        };
        if better && mass > 0.0 {
            best = Some((mass, c));
        }
    }
    let (mass, cluster) = best.ok_or_else(|| Error::EmptyMeasurements("no cluster with positive excess power".into()))?;
    let (mut sx, mut sy) = (0.0, 0.0);
    for &i in &cluster.cells {
        let e = excess(
            cur.channel(cluster.channel).values()[i],
            report.baseline_db.channel(cluster.channel).values()[i],
        );
        let (x, y) = geo.cell_center(i / geo.n_cols, i % geo.n_cols);
        sx += e * x;
        sy += e * y;
    }
    Ok(RogueEstimate {
        channel: cluster.channel,
        x: sx / mass,
        y: sy / mass,
        excess_power: mass * geo.cell_area(),
        n_cells: cluster.cells.len(),
    })
}

fn excess(current_db: f64, baseline_db: f64) -> f64 {
    (db_to_watts(current_db) - db_to_watts(baseline_db)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Geometry;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn geo() -> Geometry {
        Geometry::new(0.0, 0.0, 100.0, 30, 30).unwrap()
    }

    fn base(r: usize, c: usize) -> f64 {
        -90.0 + 0.2 * r as f64 - 0.1 * c as f64
    }

    fn map(seed: u64, sigma: f64, extra: impl Fn(usize, usize) -> f64) -> BandGrid {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, sigma).unwrap();
        let g = Grid2D::from_fn(geo(), Unit::Db, |r, c, _, _| base(r, c) + n.sample(&mut rng) + extra(r, c)).unwrap();
        BandGrid::single(g, 1e8, 1e6).unwrap()
    }

    fn history(seed: u64) -> Vec<BandGrid> {
        (0..8).map(|k| map(seed * 100 + k, 0.4, |_, _| 0.0)).collect()
    }

    #[test]
    fn mean_current_is_quiet() {
        let h = history(1);
        let refs: Vec<&BandGrid> = h.iter().collect();
        let r0 = detect_anomaly_in(&refs, &h[0], 3.0).unwrap();
        let r = detect_anomaly_in(&refs, &r0.baseline_db, 3.0).unwrap();
        assert_eq!(r.n_flagged(), 0);
        assert!(r.clusters.is_empty());
    }

    #[test]
    fn disk_is_one_cluster() {
        let h = history(2);
        let refs: Vec<&BandGrid> = h.iter().collect();
        let in_disk = |r: usize, c: usize| (r as f64 - 12.0).hypot(c as f64 - 17.0) <= 3.0;
        let cur = map(99, 0.4, |r, c| if in_disk(r, c) { 20.0 } else { 0.0 });
        let rep = detect_anomaly_in(&refs, &cur, 5.0).unwrap();
        assert_eq!(rep.clusters.len(), 1);
        let disk: Vec<usize> = (0..900).filter(|&i| in_disk(i / 30, i % 30)).collect();
        let covered = disk.iter().filter(|i| rep.clusters[0].cells.contains(i)).count();
        assert!(covered as f64 >= 0.9 * disk.len() as f64);
        let rogue = locate_rogue(&rep, &cur).unwrap();
        let (tx, ty) = geo().cell_center(12, 17);
        assert!((rogue.x - tx).hypot(rogue.y - ty) <= 2.0 * 100.0, "{rogue:?}");
        assert!(rogue.excess_power > 0.0);
    }

    #[test]
    fn shift_invariance() {
        let h = history(3);
        let cur = map(7, 0.4, |r, c| if r == 4 && c < 6 { 9.0 } else { 0.0 });
        let refs: Vec<&BandGrid> = h.iter().collect();
        let a = detect_anomaly_in(&refs, &cur, 4.0).unwrap();
        let shift = |m: &BandGrid| m.with_grids(vec![m.channel(0).map(Unit::Db, |v| v + 13.0).unwrap()]);
        let hs: Vec<BandGrid> = h.iter().map(shift).collect();
        let refs: Vec<&BandGrid> = hs.iter().collect();
        let b = detect_anomaly_in(&refs, &shift(&cur), 4.0).unwrap();
        assert_eq!(a.flagged, b.flagged);
        for (x, y) in a.z.channel(0).values().iter().zip(b.z.channel(0).values()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn needs_history_and_positive_cluster() {
        let h = history(4);
        assert!(detect_anomaly_in(&[&h[0], &h[1]], &h[2], 3.0).is_err());
        let refs: Vec<&BandGrid> = h.iter().collect();
        let dip = map(5, 0.4, |r, c| if r < 3 && c < 3 { -30.0 } else { 0.0 });
        let rep = detect_anomaly_in(&refs, &dip, 5.0).unwrap();
        assert!(!rep.clusters.is_empty());
        assert!(locate_rogue(&rep, &dip).is_err());
    }

    #[test]
    fn equal_clusters_tie_to_first() {
        let flat: Vec<BandGrid> = (0..3)
            .map(|_| BandGrid::single(Grid2D::filled(geo(), -90.0, Unit::Db).unwrap(), 1e8, 1e6).unwrap())
            .collect();
        let refs: Vec<&BandGrid> = flat.iter().collect();
        let cur = Grid2D::from_fn(geo(), Unit::Db, |r, c, _, _| {
            if (r == 5 && (3..6).contains(&c)) || (r == 20 && (3..6).contains(&c)) {
                -70.0
            } else {
                -90.0
            }
        })
        .unwrap();
        let cur = BandGrid::single(cur, 1e8, 1e6).unwrap();
        let rep = detect_anomaly_in(&refs, &cur, 5.0).unwrap();
        assert_eq!(rep.clusters.len(), 2);
        let rogue = locate_rogue(&rep, &cur).unwrap();
        assert_eq!((rogue.x, rogue.y), geo().cell_center(5, 4));
    }
}
