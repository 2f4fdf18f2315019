//! Ordinary Kriging.
//!
//! Weights solve
//!
//! ```text
//! [ Γ  1 ] [ w ]   [ γ(x) ]
//! [ 1ᵀ 0 ] [ μ ] = [  1   ]
//! ```
//!
//! with `Γ_ij = γ(|x_i − x_j|)`. The prediction is `Σ w_i φ_i` and the
//! Kriging variance `wᵀγ(x) + μ`. Up to [`GLOBAL_LIMIT`] sensors the system
//! is factored once and shared by every query; larger sets use the
//! [`LOCAL_NEIGHBOURS`] nearest sensors per query.

use nalgebra::{DMatrix, DVector};

use super::linalg::Factored;
use super::variogram::Variogram;
use crate::error::{Error, Result};
use crate::sensing::Sample;

pub const GLOBAL_LIMIT: usize = 1000;
pub const LOCAL_NEIGHBOURS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrigingPrediction {
    pub mean: f64,
    /// Kriging variance, dB².
    pub variance: f64,
}

/// Weights and Lagrange multiplier for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigingWeights {
    /// Indices into the training samples the weights refer to.
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub lagrange: f64,
}

/// Assembles the bordered system for the given sample subset and query.
pub fn kriging_system(samples: &[Sample], idx: &[usize], v: &Variogram, x: f64, y: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = idx.len();
    let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut b = DVector::<f64>::zeros(n + 1);
    for (p, &i) in idx.iter().enumerate() {
        for (q, &j) in idx.iter().enumerate() {
            if p != q {
                let h = (samples[i].x - samples[j].x).hypot(samples[i].y - samples[j].y);
                a[(p, q)] = v.gamma_pair(h);
            }
        }
        a[(p, n)] = 1.0;
        a[(n, p)] = 1.0;
        b[p] = v.gamma((samples[i].x - x).hypot(samples[i].y - y));
    }
    b[n] = 1.0;
    (a, b)
}

#[derive(Debug, Clone)]
pub struct KrigingModel {
    samples: Vec<Sample>,
    variogram: Variogram,
    global: Option<Factored>,
}

impl KrigingModel {
    pub fn fit(samples: &[Sample], variogram: &Variogram) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::EmptyMeasurements(format!(
                "Kriging needs at least two measurements, got {}",
                samples.len()
            )));
        }
        variogram.validate()?;
        let global = if samples.len() <= GLOBAL_LIMIT {
            let idx: Vec<usize> = (0..samples.len()).collect();
            let (a, _) = kriging_system(samples, &idx, variogram, samples[0].x, samples[0].y);
            Some(Factored::new(a, "Kriging system")?)
        } else {
            None
        };
        Ok(KrigingModel {
            samples: samples.to_vec(),
            variogram: variogram.clone(),
            global,
        })
    }

    pub fn variogram(&self) -> &Variogram {
        &self.variogram
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    fn neighbourhood(&self, x: f64, y: f64) -> Vec<usize> {
        let mut idx: Vec<(f64, usize)> = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| ((s.x - x).hypot(s.y - y), i))
            .collect();
        idx.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut out: Vec<usize> = idx[..LOCAL_NEIGHBOURS].iter().map(|p| p.1).collect();
        out.sort_unstable();
        out
    }

    pub fn weights(&self, x: f64, y: f64) -> Result<KrigingWeights> {
        let (idx, sol) = match &self.global {
            Some(f) => {
                let n = self.samples.len();
                let mut b = DVector::<f64>::zeros(n + 1);
                for (i, s) in self.samples.iter().enumerate() {
                    b[i] = self.variogram.gamma((s.x - x).hypot(s.y - y));
                }
                b[n] = 1.0;
                ((0..n).collect::<Vec<_>>(), f.solve(&b)?)
            }
            None => {
                let idx = self.neighbourhood(x, y);
                let (a, b) = kriging_system(&self.samples, &idx, &self.variogram, x, y);
                let sol = Factored::new(a, "local Kriging system")?.solve(&b)?;
                (idx, sol)
            }
        };
        let n = idx.len();
        Ok(KrigingWeights {
            weights: sol.iter().take(n).copied().collect(),
            lagrange: sol[n],
            indices: idx,
        })
    }

    pub fn predict(&self, x: f64, y: f64) -> Result<KrigingPrediction> {
        let w = self.weights(x, y)?;
        let mut mean = 0.0;
        let mut variance = w.lagrange;
        for (&i, &wi) in w.indices.iter().zip(&w.weights) {
            let s = &self.samples[i];
            mean += wi * s.value;
            variance += wi * self.variogram.gamma((s.x - x).hypot(s.y - y));
        }
        Ok(KrigingPrediction {
            mean,
            variance: variance.max(0.0),
        })
    }
}

/// Fits and evaluates ordinary Kriging at one query point.
pub fn estimate_kriging(samples: &[Sample], x: f64, y: f64, v: &Variogram) -> Result<KrigingPrediction> {
    KrigingModel::fit(samples, v)?.predict(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_samples(seed: u64, n: usize) -> Vec<Sample> {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Sample {
                x: r.random_range(0.0..2000.0),
                y: r.random_range(0.0..2000.0),
                value: r.random_range(-100.0..-50.0),
            })
            .collect()
    }

    /// Dense Gaussian elimination with partial pivoting, independent of the
    /// factorisation used by the model.
    #[allow(clippy::needless_range_loop)]
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn weights_match_independent_solve() {
        let v = Variogram::exponential(0.5, 20.0, 900.0).unwrap();
        for seed in 0..10 {
            let s = random_samples(seed, 30);
            let m = KrigingModel::fit(&s, &v).unwrap();
            let (qx, qy) = (700.0 + seed as f64 * 37.0, 1100.0);
            let w = m.weights(qx, qy).unwrap();
            assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            let idx: Vec<usize> = (0..s.len()).collect();
            let (a, b) = kriging_system(&s, &idx, &v, qx, qy);
            let rows: Vec<Vec<f64>> = (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect();
            let oracle = dense_solve(rows, b.iter().copied().collect());
            for (p, q) in w.weights.iter().chain([w.lagrange].iter()).zip(&oracle) {
                assert!((p - q).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn exact_at_sensors_with_zero_nugget() {
        let v = Variogram::exponential(0.0, 10.0, 500.0).unwrap();
        let s = random_samples(5, 25);
        let m = KrigingModel::fit(&s, &v).unwrap();
        for p in &s {
            let pred = m.predict(p.x, p.y).unwrap();
            assert!((pred.mean - p.value).abs() < 1e-6);
            assert!(pred.variance <= 1e-9);
        }
    }

    #[test]
    fn duplicate_sites_are_singular_without_nugget() {
        let mut s = random_samples(6, 10);
        s.push(Sample { value: -60.0, ..s[2] });
        let v0 = Variogram::exponential(0.0, 10.0, 500.0).unwrap();
        assert!(matches!(KrigingModel::fit(&s, &v0), Err(Error::Conditioning(_))));
        let v1 = Variogram::exponential(1.0, 10.0, 500.0).unwrap();
        assert!(KrigingModel::fit(&s, &v1).is_ok());
    }

    #[test]
    fn variance_grows_away_from_data() {
        let v = Variogram::exponential(0.0, 10.0, 300.0).unwrap();
        let s = random_samples(7, 20);
        let m = KrigingModel::fit(&s, &v).unwrap();
        let near = m.predict(s[0].x + 1.0, s[0].y).unwrap().variance;
        let far = m.predict(50_000.0, 50_000.0).unwrap().variance;
        assert!(near < far);
        // far from every sensor the prediction is the generalised-LS mean
        assert!(far > 10.0);
    }

    #[test]
    fn local_neighbourhood_for_large_sets() {
        let s = random_samples(8, GLOBAL_LIMIT + 50);
        let v = Variogram::exponential(0.1, 10.0, 400.0).unwrap();
        let m = KrigingModel::fit(&s, &v).unwrap();
        let w = m.weights(1000.0, 1000.0).unwrap();
        assert_eq!(w.indices.len(), LOCAL_NEIGHBOURS);
        assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let p = m.predict(s[10].x, s[10].y).unwrap();
        assert!((p.mean - s[10].value).abs() < 1e-6);
    }
}
