//! Inverse-distance weighting and its angle-aware variant.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::sensing::Sample;

/// Distance below which a query is treated as sitting on a sensor.
pub const COINCIDENCE_M: f64 = 1e-9;

fn check(samples: &[Sample], d_exp: f64) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyMeasurements("IDW needs at least one measurement".into()));
    }
    if !(d_exp > 0.0) {
        return Err(Error::InvalidInput(format!("IDW exponent must be positive, got {d_exp}")));
    }
    Ok(())
}

fn coincident(samples: &[Sample], x: f64, y: f64) -> Option<usize> {
    samples
        .iter()
        .position(|s| (s.x - x).hypot(s.y - y) < COINCIDENCE_M)
}

fn weighted_mean(samples: &[Sample], weights: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for w in weights {
        den += w;
    }
    // normalising first keeps a lone weight exactly one
    for (s, w) in samples.iter().zip(weights) {
        num += (w / den) * s.value;
    }
    num
}

/// Normalised IDW weights `|x − x_i|^(−d)`, or a unit weight on a
/// coincident sensor.
pub fn idw_weights(samples: &[Sample], x: f64, y: f64, d_exp: f64) -> Result<Vec<f64>> {
    check(samples, d_exp)?;
    let mut w = vec![0.0; samples.len()];
    if let Some(i) = coincident(samples, x, y) {
        w[i] = 1.0;
        return Ok(w);
    }
    for (wi, s) in w.iter_mut().zip(samples) {
        *wi = (s.x - x).hypot(s.y - y).powf(-d_exp);
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

pub fn estimate_idw(samples: &[Sample], x: f64, y: f64, d_exp: f64) -> Result<f64> {
    check(samples, d_exp)?;
    if let Some(i) = coincident(samples, x, y) {
        return Ok(samples[i].value);
    }
    let w: Vec<f64> = samples
        .iter()
        .map(|s| (s.x - x).hypot(s.y - y).powf(-d_exp))
        .collect();
    Ok(weighted_mean(samples, &w))
}

/// Angular isolation factor of each sensor as seen from the query: half the
/// angle between its two neighbours in angular order, divided by π. Ties in
/// angle are ordered by sample index. With two sensors or fewer every factor
/// is one.
pub fn angular_factors(samples: &[Sample], x: f64, y: f64) -> Vec<f64> {
    let n = samples.len();
    if n <= 2 {
        return vec![1.0; n];
    }
    let theta: Vec<f64> = samples.iter().map(|s| (s.y - y).atan2(s.x - x)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| theta[a].total_cmp(&theta[b]).then(a.cmp(&b)));
    // gap[k] is the forward angle from order[k] to order[k + 1]
    let gap: Vec<f64> = (0..n)
        .map(|k| {
            if k + 1 < n {
                theta[order[k + 1]] - theta[order[k]]
            } else {
                theta[order[0]] + 2.0 * PI - theta[order[n - 1]]
            }
        })
        .collect();
    let mut a = vec![0.0; n];
    for k in 0..n {
        let span = gap[(k + n - 1) % n] + gap[k];
        a[order[k]] = 0.5 * span / PI;
    }
    a
}

/// IDW weights scaled by [`angular_factors`], normalised.
pub fn midw_weights(samples: &[Sample], x: f64, y: f64, d_exp: f64) -> Result<Vec<f64>> {
    check(samples, d_exp)?;
    let mut w = vec![0.0; samples.len()];
    if let Some(i) = coincident(samples, x, y) {
        w[i] = 1.0;
        return Ok(w);
    }
    let a = angular_factors(samples, x, y);
    for ((wi, s), ai) in w.iter_mut().zip(samples).zip(&a) {
        *wi = (s.x - x).hypot(s.y - y).powf(-d_exp) * ai;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

pub fn estimate_midw(samples: &[Sample], x: f64, y: f64, d_exp: f64) -> Result<f64> {
    let w = midw_weights(samples, x, y, d_exp)?;
    Ok(samples.iter().zip(&w).map(|(s, w)| s.value * w).sum())
}
