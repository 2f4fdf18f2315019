//! Least-squares fit of a log-distance path-loss model with unknown
//! transmitter position.
//!
//! For a fixed candidate position the model `φ = P − 10·η·log10(d)` is
//! linear in `(P, η)` and solved in closed form. The position is found by a
//! coarse grid search followed by compass pattern search with step halving.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Geometry;
use crate::sensing::Sample;

/// Lower bound on the fitted exponent.
pub const MIN_EXPONENT: f64 = 1e-3;
/// Coarse search resolution per axis.
pub const COARSE_GRID: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossFit {
    pub x: f64,
    pub y: f64,
    /// Received level at 1 m, dB.
    pub ref_power_db: f64,
    pub exponent: f64,
    pub residual_rms: f64,
    /// Set when reference power and exponent are not jointly identifiable
    /// from the data (no spread in log-distance, or the exponent hit its
    /// lower bound).
    pub ill_conditioned: bool,
    pub n_samples: usize,
}

impl PathLossFit {
    /// Predicted level in dB at `(x, y)`.
    pub fn predict_db(&self, x: f64, y: f64, d_min: f64) -> f64 {
        let d = (x - self.x).hypot(y - self.y).max(d_min);
        self.ref_power_db - 10.0 * self.exponent * d.log10()
    }
}

/// Axis-aligned search box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn of(g: &Geometry) -> Self {
        Bounds {
            x_min: g.origin_x,
            y_min: g.origin_y,
            x_max: g.x_max(),
            y_max: g.y_max(),
        }
    }

    fn clamp(&self, x: f64, y: f64) -> (f64, f64) {
        (x.clamp(self.x_min, self.x_max), y.clamp(self.y_min, self.y_max))
    }
}

struct Inner {
    ref_power_db: f64,
    exponent: f64,
    sse: f64,
    degenerate: bool,
    at_bound: bool,
}

fn solve_at(samples: &[Sample], x: f64, y: f64, d_min: f64) -> Inner {
    let n = samples.len() as f64;
    let u: Vec<f64> = samples
        .iter()
        .map(|s| -10.0 * (s.x - x).hypot(s.y - y).max(d_min).log10())
        .collect();
    let mu = u.iter().sum::<f64>() / n;
    let mv = samples.iter().map(|s| s.value).sum::<f64>() / n;
    let suu: f64 = u.iter().map(|v| (v - mu).powi(2)).sum();
    let suv: f64 = u.iter().zip(samples).map(|(a, s)| (a - mu) * (s.value - mv)).sum();
    let degenerate = suu <= 1e-12 * n;
    let raw = if degenerate { MIN_EXPONENT } else { suv / suu };
    let at_bound = raw <= MIN_EXPONENT;
    let exponent = raw.max(MIN_EXPONENT);
    let ref_power_db = mv - exponent * mu;
    let sse = u
        .iter()
        .zip(samples)
        .map(|(a, s)| (s.value - ref_power_db - exponent * a).powi(2))
        .sum();
    Inner {
        ref_power_db,
        exponent,
        sse,
        degenerate,
        at_bound,
    }
}

/// Fits position, reference power and exponent to `samples` (values in dB).
///
/// `init` is evaluated alongside the coarse grid; refinement stops once the
/// pattern step falls below `1e-6 · d_min`.
pub fn fit_pathloss_single(samples: &[Sample], init: (f64, f64), bounds: Bounds, d_min: f64) -> Result<PathLossFit> {
    if samples.len() < 4 {
        return Err(Error::EmptyMeasurements(format!(
            "path-loss fit needs at least 4 measurements, got {}",
            samples.len()
        )));
    }
    if !(bounds.x_max > bounds.x_min) || !(bounds.y_max > bounds.y_min) {
        return Err(Error::InvalidInput("empty search bounds".into()));
    }
    if !(d_min > 0.0) {
        return Err(Error::InvalidInput("d_min must be positive".into()));
    }
    let sse = |x: f64, y: f64| solve_at(samples, x, y, d_min).sse;

    let (ix, iy) = bounds.clamp(init.0, init.1);
    let mut best = (ix, iy, sse(ix, iy));
    let dx = (bounds.x_max - bounds.x_min) / COARSE_GRID as f64;
    let dy = (bounds.y_max - bounds.y_min) / COARSE_GRID as f64;
    for i in 0..COARSE_GRID {
        for j in 0..COARSE_GRID {
            let x = bounds.x_min + (j as f64 + 0.5) * dx;
            let y = bounds.y_min + (i as f64 + 0.5) * dy;
            let e = sse(x, y);
            if e < best.2 {
                best = (x, y, e);
            }
        }
    }

    let mut step = 0.5 * dx.max(dy);
    let tol = 1e-6 * d_min;
    const MOVES: [(f64, f64); 8] = [
        (1.0, 0.0),
        (-1.0, 0.0),
        (0.0, 1.0),
        (0.0, -1.0),
        (1.0, 1.0),
        (1.0, -1.0),
        (-1.0, 1.0),
        (-1.0, -1.0),
    ];
    let mut evals = 0usize;
    while step >= tol && evals < 200_000 {
        let mut improved = false;
        for (mx, my) in MOVES {
            let (x, y) = bounds.clamp(best.0 + mx * step, best.1 + my * step);
            let e = sse(x, y);
            evals += 1;
            if e < best.2 {
                best = (x, y, e);
                improved = true;
                break;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    let inner = solve_at(samples, best.0, best.1, d_min);
    Ok(PathLossFit {
        x: best.0,
        y: best.1,
        ref_power_db: inner.ref_power_db,
        exponent: inner.exponent,
        residual_rms: (inner.sse / samples.len() as f64).sqrt(),
        ill_conditioned: inner.degenerate || inner.at_bound,
        n_samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    fn bounds() -> Bounds {
        Bounds {
            x_min: 0.0,
            y_min: 0.0,
            x_max: 10_000.0,
            y_max: 10_000.0,
        }
    }

    fn forward(tx: (f64, f64), p: f64, eta: f64, pts: &[(f64, f64)], d_min: f64) -> Vec<Sample> {
        pts.iter()
            .map(|&(x, y)| Sample {
                x,
                y,
                value: p - 10.0 * eta * (x - tx.0).hypot(y - tx.1).max(d_min).log10(),
            })
            .collect()
    }

    fn lattice(n: usize) -> Vec<(f64, f64)> {
        let step = 10_000.0 / n as f64;
        (0..n * n)
            .map(|k| ((k % n) as f64 * step + step / 2.0, (k / n) as f64 * step + step / 2.0))
            .collect()
    }

    #[test]
    fn noiseless_inverse_crime() {
        let tx = (3_217.0, 6_871.0);
        let s = forward(tx, -31.0, 3.0, &lattice(14), 50.0);
        let f = fit_pathloss_single(&s, (5_000.0, 5_000.0), bounds(), 50.0).unwrap();
        assert!(((f.exponent - 3.0) / 3.0).abs() < 1e-6, "{f:?}");
        assert!((f.x - tx.0).hypot(f.y - tx.1) < 10.0, "{f:?}");
        assert!((f.ref_power_db + 31.0).abs() < 1e-4);
        assert!(f.residual_rms < 1e-6);
        assert!(!f.ill_conditioned);
    }

    #[test]
    fn noisy_exponent_within_five_percent() {
        let tx = (6_000.0, 2_500.0);
        let clean = forward(tx, -30.0, 3.5, &lattice(14), 50.0);
        let mut errs: Vec<f64> = (0..10)
            .map(|seed| {
                let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let n = Normal::new(0.0, 1.0).unwrap();
                let s: Vec<Sample> = clean
                    .iter()
                    .map(|p| Sample { value: p.value + n.sample(&mut r), ..*p })
                    .collect();
                let f = fit_pathloss_single(&s, (5_000.0, 5_000.0), bounds(), 50.0).unwrap();
                ((f.exponent - 3.5) / 3.5).abs()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        assert!(errs[5] < 0.05, "{errs:?}");
    }

    #[test]
    fn equidistant_sensors_are_flagged() {
        let tx = (5_000.0, 5_000.0);
        let ring: Vec<(f64, f64)> = (0..16)
            .map(|k| {
                let t = k as f64 * std::f64::consts::PI / 8.0;
                (tx.0 + 800.0 * t.cos(), tx.1 + 800.0 * t.sin())
            })
            .collect();
        let s = forward(tx, -30.0, 3.0, &ring, 50.0);
        let f = fit_pathloss_single(&s, tx, bounds(), 50.0).unwrap();
        assert!(f.ill_conditioned, "{f:?}");
        assert!(f.exponent > 0.0);
    }

    #[test]
    fn needs_four_samples() {
        let s = forward((1.0, 1.0), -30.0, 3.0, &[(5.0, 5.0), (9.0, 1.0), (3.0, 7.0)], 0.5);
        assert!(matches!(
            fit_pathloss_single(&s, (0.0, 0.0), bounds(), 0.5),
            Err(Error::EmptyMeasurements(_))
        ));
    }

    #[test]
    fn init_is_a_candidate() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<(f64, f64)> = (0..50).map(|_| (r.random_range(0.0..10_000.0), r.random_range(0.0..10_000.0))).collect();
        let s = forward((7_100.0, 1_300.0), -30.0, 2.7, &pts, 50.0);
        let f = fit_pathloss_single(&s, (7_100.0, 1_300.0), bounds(), 50.0).unwrap();
        assert!(f.residual_rms < 1e-6);
    }
}
