//! Radial basis function interpolation.
//!
//! Solves `(K + ridge·I) c = φ` with `K_ij = rbf(|x_i − x_j| / shape)`. The
//! thin-plate kernel is only conditionally positive definite, so it carries
//! an affine polynomial with the usual orthogonality side conditions; this
//! also makes it reproduce constant (and linear) fields exactly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::Factored;
use crate::error::{Error, Result};
use crate::sensing::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RbfKind {
    Gaussian,
    Multiquadric,
    ThinPlate,
}

impl RbfKind {
    /// Kernel value at scaled distance `s = r / shape`.
    #[inline]
    pub fn eval(self, s: f64) -> f64 {
        match self {
            RbfKind::Gaussian => (-s * s).exp(),
            RbfKind::Multiquadric => (1.0 + s * s).sqrt(),
            RbfKind::ThinPlate => {
                if s == 0.0 {
                    0.0
                } else {
                    s * s * s.ln()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Poly {
    None,
    Constant,
    Affine,
}

impl Poly {
    fn terms(self) -> usize {
        match self {
            Poly::None => 0,
            Poly::Constant => 1,
            Poly::Affine => 3,
        }
    }
}

/// Fitted RBF interpolant.
#[derive(Debug, Clone)]
pub struct RbfModel {
    kind: RbfKind,
    shape: f64,
    centers: Vec<(f64, f64)>,
    coeffs: Vec<f64>,
    poly: Poly,
    poly_coeffs: [f64; 3],
    // polynomial terms are evaluated in centred, shape-scaled coordinates
    cx: f64,
    cy: f64,
}

impl RbfModel {
    pub fn fit(samples: &[Sample], kind: RbfKind, shape: f64, ridge: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::EmptyMeasurements(format!(
                "RBF needs at least two measurements, got {}",
                samples.len()
            )));
        }
        if !(shape > 0.0) {
            return Err(Error::InvalidInput(format!("RBF shape must be positive, got {shape}")));
        }
        if !(ridge >= 0.0) {
            return Err(Error::InvalidInput(format!("RBF ridge must be non-negative, got {ridge}")));
        }
        let n = samples.len();
        let cx = samples.iter().map(|s| s.x).sum::<f64>() / n as f64;
        let cy = samples.iter().map(|s| s.y).sum::<f64>() / n as f64;
        let poly = match kind {
            RbfKind::ThinPlate if n >= 3 && !collinear(samples) => Poly::Affine,
            RbfKind::ThinPlate => Poly::Constant,
            _ => Poly::None,
        };
        let m = poly.terms();
        let mut a = DMatrix::<f64>::zeros(n + m, n + m);
        for i in 0..n {
            for j in 0..n {
                let r = (samples[i].x - samples[j].x).hypot(samples[i].y - samples[j].y);
                a[(i, j)] = kind.eval(r / shape);
            }
            a[(i, i)] += ridge;
            let row = poly_row(poly, samples[i].x, samples[i].y, cx, cy, shape);
            for (k, p) in row.iter().take(m).enumerate() {
                a[(i, n + k)] = *p;
                a[(n + k, i)] = *p;
            }
        }
        let mut rhs = DVector::<f64>::zeros(n + m);
        for (i, s) in samples.iter().enumerate() {
            rhs[i] = s.value;
        }
        let sol = Factored::new(a, "RBF system")?.solve(&rhs)?;
        let mut poly_coeffs = [0.0; 3];
        for k in 0..m {
            poly_coeffs[k] = sol[n + k];
        }
        Ok(RbfModel {
            kind,
            shape,
            centers: samples.iter().map(|s| (s.x, s.y)).collect(),
            coeffs: sol.iter().take(n).copied().collect(),
            poly,
            poly_coeffs,
            cx,
            cy,
        })
    }

    pub fn predict(&self, x: f64, y: f64) -> f64 {
        let mut v = 0.0;
        for ((px, py), c) in self.centers.iter().zip(&self.coeffs) {
            v += c * self.kind.eval((px - x).hypot(py - y) / self.shape);
        }
        let row = poly_row(self.poly, x, y, self.cx, self.cy, self.shape);
        v += self.poly_coeffs.iter().zip(&row).take(self.poly.terms()).map(|(c, r)| c * r).sum::<f64>();
        v
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }
}

fn poly_row(poly: Poly, x: f64, y: f64, cx: f64, cy: f64, shape: f64) -> [f64; 3] {
    match poly {
        Poly::None => [0.0; 3],
        Poly::Constant => [1.0, 0.0, 0.0],
        Poly::Affine => [1.0, (x - cx) / shape, (y - cy) / shape],
    }
}

fn collinear(samples: &[Sample]) -> bool {
    let (x0, y0) = (samples[0].x, samples[0].y);
    let far = samples
        .iter()
        .max_by(|a, b| {
            (a.x - x0)
                .hypot(a.y - y0)
                .total_cmp(&(b.x - x0).hypot(b.y - y0))
        })
        .expect("non-empty");
    let (dx, dy) = (far.x - x0, far.y - y0);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return true;
    }
    samples
        .iter()
        .all(|s| ((s.x - x0) * dy - (s.y - y0) * dx).abs() <= 1e-9 * len * len)
}

/// Fits and evaluates an RBF interpolant at one query point.
pub fn estimate_rbf(samples: &[Sample], x: f64, y: f64, kind: RbfKind, shape: f64, ridge: f64) -> Result<f64> {
    Ok(RbfModel::fit(samples, kind, shape, ridge)?.predict(x, y))
}
