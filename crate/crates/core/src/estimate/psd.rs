//! Non-negative projection of a sampled PSD onto raised-cosine bases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{db_to_watts, DB_FLOOR};

pub const MAX_ITERATIONS: usize = 10_000;
pub const REL_TOL: f64 = 1e-10;

/// Raised-cosine spectral shape with unit peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaisedCosine {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    /// Roll-off factor in `[0, 1]`.
    pub rolloff: f64,
}

impl RaisedCosine {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) || !(0.0..=1.0).contains(&self.rolloff) || !self.center_hz.is_finite() {
            return Err(Error::InvalidInput(format!("invalid raised-cosine basis {self:?}")));
        }
        Ok(())
    }

    pub fn eval(&self, f: f64) -> f64 {
        let d = (f - self.center_hz).abs();
        let inner = (1.0 - self.rolloff) * self.bandwidth_hz / 2.0;
        let outer = (1.0 + self.rolloff) * self.bandwidth_hz / 2.0;
        if d <= inner {
            1.0
        } else if d <= outer {
            0.5 * (1.0 + (std::f64::consts::PI * (d - inner) / (self.rolloff * self.bandwidth_hz)).cos())
        } else {
            0.0
        }
    }
}

/// PSD samples at given frequencies, in dB; values at or below the dB floor
/// count as zero power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdSamples {
    pub freqs_hz: Vec<f64>,
    pub values_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisProjection {
    pub coefficients: Vec<f64>,
    /// Final value of ½‖Bc − p‖².
    pub objective: f64,
    pub iterations: usize,
}

/// Non-negative least squares of the linear-domain PSD onto `bases` by
/// projected gradient descent with step `1/L`, `L = λ_max(BᵀB)`.
pub fn psd_basis_project(psd: &PsdSamples, bases: &[RaisedCosine]) -> Result<BasisProjection> {
    if psd.freqs_hz.len() != psd.values_db.len() {
        return Err(Error::InvalidInput("frequency and value counts differ".into()));
    }
    for b in bases {
        b.validate()?;
    }
    let m = psd.freqs_hz.len();
    let k = bases.len();
    let p: Vec<f64> = psd
        .values_db
        .iter()
        .map(|&v| if v <= DB_FLOOR { 0.0 } else { db_to_watts(v) })
        .collect();
    let b: Vec<Vec<f64>> = psd.freqs_hz.iter().map(|&f| bases.iter().map(|bs| bs.eval(f)).collect()).collect();

    // Normal equations: G = BᵀB, h = Bᵀp.
    let mut g = vec![vec![0.0; k]; k];
    let mut h = vec![0.0; k];
    for i in 0..m {
        for a in 0..k {
            h[a] += b[i][a] * p[i];
            for c in 0..k {
                g[a][c] += b[i][a] * b[i][c];
            }
        }
    }
    let pp: f64 = p.iter().map(|v| v * v).sum();
    let objective = |c: &[f64]| -> f64 {
        let mut q = 0.0;
        for a in 0..k {
            for d in 0..k {
                q += c[a] * g[a][d] * c[d];
            }
        }
        let lin: f64 = c.iter().zip(&h).map(|(x, y)| x * y).sum();
        (0.5 * q - lin + 0.5 * pp).max(0.0)
    };

    let lip = nalgebra::DMatrix::from_fn(k, k, |a, c| g[a][c])
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v));
    let mut c = vec![0.0; k];
    let mut obj = objective(&c);
    if k == 0 || lip <= 0.0 || pp == 0.0 {
        return Ok(BasisProjection {
            coefficients: c,
            objective: obj,
            iterations: 0,
        });
    }
    let step = 1.0 / lip;
    let mut it = 0;
    while it < MAX_ITERATIONS {
        it += 1;
        let grad: Vec<f64> = (0..k).map(|a| (0..k).map(|d| g[a][d] * c[d]).sum::<f64>() - h[a]).collect();
        for a in 0..k {
            c[a] = (c[a] - step * grad[a]).max(0.0);
        }
        let next = objective(&c);
        let change = (obj - next).abs();
        obj = next;
        if obj <= 1e-30 * pp || change <= REL_TOL * obj.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(BasisProjection {
        coefficients: c,
        objective: obj,
        iterations: it,
    })
}
