//! Empirical semivariance and exponential model fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensing::Sample;

/// Sill reported for fields without any variance, keeping `sill > 0`.
pub const MIN_SILL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramBin {
    /// Mean pair separation in the bin, meters.
    pub lag: f64,
    pub semivariance: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariogramModel {
    Exponential,
}

/// Exponential variogram with the practical-range convention:
/// `γ(h) = nugget + (sill − nugget)(1 − exp(−3h / range))` for `h > 0`,
/// `γ(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variogram {
    pub model: VariogramModel,
    pub nugget: f64,
    pub sill: f64,
    pub range: f64,
    #[serde(default)]
    pub bins: Vec<VariogramBin>,
}

impl Variogram {
    pub fn exponential(nugget: f64, sill: f64, range: f64) -> Result<Self> {
        let v = Variogram {
            model: VariogramModel::Exponential,
            nugget,
            sill,
            range,
            bins: Vec::new(),
        };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nugget >= 0.0) || !(self.sill > 0.0) || self.nugget > self.sill {
            return Err(Error::InvalidInput(format!(
                "variogram needs 0 ≤ nugget ≤ sill, sill > 0 (nugget {}, sill {})",
                self.nugget, self.sill
            )));
        }
        if !(self.range > 0.0) || !self.range.is_finite() {
            return Err(Error::InvalidInput(format!("variogram range {} must be positive", self.range)));
        }
        Ok(())
    }

    /// Semivariance at lag `h`, zero at the origin.
    #[inline]
    pub fn gamma(&self, h: f64) -> f64 {
        if h == 0.0 {
            0.0
        } else {
            self.gamma_pair(h)
        }
    }

    /// Semivariance between two distinct observations at lag `h`. At `h = 0`
    /// this is the nugget: co-located sensors still differ by measurement
    /// error.
    #[inline]
    pub fn gamma_pair(&self, h: f64) -> f64 {
        self.nugget + (self.sill - self.nugget) * (1.0 - (-3.0 * h / self.range).exp())
    }
}

/// Binned `½(φ_i − φ_j)²` over all pairs with lag in `(0, max_lag]`.
/// Empty bins are dropped.
pub fn empirical_variogram(samples: &[Sample], n_bins: usize, max_lag: f64) -> Result<Vec<VariogramBin>> {
    if n_bins == 0 || !(max_lag > 0.0) {
        return Err(Error::InvalidInput(format!(
            "variogram binning needs n_bins > 0 and max_lag > 0 (got {n_bins}, {max_lag})"
        )));
    }
    let width = max_lag / n_bins as f64;
    let mut sum_lag = vec![0.0; n_bins];
    let mut sum_sv = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let h = (samples[i].x - samples[j].x).hypot(samples[i].y - samples[j].y);
            if h <= 0.0 || h > max_lag {
                continue;
            }
            let b = ((h / width).ceil() as usize).clamp(1, n_bins) - 1;
            let d = samples[i].value - samples[j].value;
            sum_lag[b] += h;
            sum_sv[b] += 0.5 * d * d;
            count[b] += 1;
        }
    }
    let bins: Vec<VariogramBin> = (0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| VariogramBin {
            lag: sum_lag[b] / count[b] as f64,
            semivariance: sum_sv[b] / count[b] as f64,
            count: count[b],
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no measurement pairs within max_lag {max_lag} m"
        )));
    }
    Ok(bins)
}

/// Best `(nugget, partial_sill, sse)` for a fixed range, both terms ≥ 0.
fn solve_fixed_range(bins: &[VariogramBin], range: f64) -> (f64, f64, f64) {
    let f: Vec<f64> = bins.iter().map(|b| 1.0 - (-3.0 * b.lag / range).exp()).collect();
    let w: Vec<f64> = bins.iter().map(|b| b.count as f64).collect();
    let g: Vec<f64> = bins.iter().map(|b| b.semivariance).collect();
    let sse = |a: f64, c: f64| -> f64 {
        (0..bins.len())
            .map(|k| w[k] * (g[k] - a - c * f[k]).powi(2))
            .sum()
    };
    let sw: f64 = w.iter().sum();
    let swf: f64 = (0..bins.len()).map(|k| w[k] * f[k]).sum();
    let swff: f64 = (0..bins.len()).map(|k| w[k] * f[k] * f[k]).sum();
    let swg: f64 = (0..bins.len()).map(|k| w[k] * g[k]).sum();
    let swfg: f64 = (0..bins.len()).map(|k| w[k] * f[k] * g[k]).sum();

    let mut candidates = Vec::with_capacity(3);
    let det = sw * swff - swf * swf;
    if det > 1e-12 * sw * swff {
        let a = (swff * swg - swf * swfg) / det;
        let c = (sw * swfg - swf * swg) / det;
        if a >= 0.0 && c >= 0.0 {
            candidates.push((a, c));
        }
    }
    // pure nugget
    candidates.push(((swg / sw).max(0.0), 0.0));
    // no nugget
    if swff > 0.0 {
        candidates.push((0.0, (swfg / swff).max(0.0)));
    }
    candidates
        .into_iter()
        .map(|(a, c)| (a, c, sse(a, c)))
        .min_by(|p, q| p.2.total_cmp(&q.2))
        .expect("at least one candidate")
}

/// Structured share of the sill below which the field is treated as pure
/// nugget and the range is pinned to the first lag.
const MIN_STRUCTURED_SHARE: f64 = 0.1;
/// Significance level of the test for spatial structure.
const STRUCTURE_ALPHA: f64 = 0.05;

/// Upper `alpha` quantile of the F(2, d) distribution, which has the closed
/// form survival function `(1 + 2f/d)^(−d/2)`.
fn f2_quantile(d: f64, alpha: f64) -> f64 {
    0.5 * d * (alpha.powf(-2.0 / d) - 1.0)
}

/// Count-weighted least-squares fit of the exponential model.
///
/// The range is searched on a log grid from a twentieth of the first lag to
/// ten times `max_lag`, then refined by golden-section search. The model is
/// collapsed to a pure nugget effect when an F test of the three-parameter
/// model against a constant fails to reject the constant at the 5 % level,
/// when the structured part carries less than a tenth of the sill, or when
/// the range falls below the first lag, where it cannot be told apart from
/// a nugget.
pub fn fit_variogram(samples: &[Sample], n_bins: usize, max_lag: f64) -> Result<Variogram> {
    if samples.len() < 10 {
        return Err(Error::EmptyMeasurements(format!(
            "variogram fit needs at least 10 measurements, got {}",
            samples.len()
        )));
    }
    if n_bins < 4 {
        return Err(Error::InvalidInput(format!("variogram fit needs at least 4 bins, got {n_bins}")));
    }
    let bins = empirical_variogram(samples, n_bins, max_lag)?;
    let first_lag = bins[0].lag;

    let lo = (first_lag / 20.0).ln();
    let hi = (10.0 * max_lag).ln();
    let steps = 200;
    let grid: Vec<f64> = (0..=steps)
        .map(|k| (lo + (hi - lo) * k as f64 / steps as f64).exp())
        .collect();
    let scores: Vec<f64> = grid.iter().map(|&r| solve_fixed_range(&bins, r).2).collect();
    let best = scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty grid");

    // golden-section refinement in log-range between the grid neighbours
    let mut a = grid[best.saturating_sub(1)].ln();
    let mut b = grid[(best + 1).min(steps)].ln();
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let eval = |t: f64| solve_fixed_range(&bins, t.exp()).2;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = eval(d);
        }
    }
    let refined = (0.5 * (a + b)).exp();
    let range = if eval(refined.ln()) <= scores[best] { refined } else { grid[best] };
    let (nugget, partial, _) = solve_fixed_range(&bins, range);

    let total = nugget + partial;
    let sw: f64 = bins.iter().map(|b| b.count as f64).sum();
    let flat = bins.iter().map(|b| b.count as f64 * b.semivariance).sum::<f64>() / sw;
    let structured = if bins.len() > 3 {
        let sse0: f64 = bins.iter().map(|b| b.count as f64 * (b.semivariance - flat).powi(2)).sum();
        let sse1 = solve_fixed_range(&bins, range).2;
        let dof = (bins.len() - 3) as f64;
        sse1 <= 0.0 || ((sse0 - sse1) / 2.0) / (sse1 / dof) > f2_quantile(dof, STRUCTURE_ALPHA)
    } else {
        true
    };
    let (nugget, sill, range) = if total <= MIN_SILL {
        (0.0, MIN_SILL, first_lag)
    } else if !structured {
        (flat, flat, range.min(first_lag))
    } else if partial < MIN_STRUCTURED_SHARE * total || range < first_lag {
        (total, total, range.min(first_lag))
    } else {
        (nugget, total, range)
    };
    Ok(Variogram {
        model: VariogramModel::Exponential,
        nugget,
        sill,
        range,
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    fn scattered(seed: u64, n: usize, value: impl Fn(&mut rand_chacha::ChaCha8Rng) -> f64) -> Vec<Sample> {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x = r.random_range(0.0..5000.0);
                let y = r.random_range(0.0..5000.0);
                Sample { x, y, value: value(&mut r) }
            })
            .collect()
    }

    #[test]
    fn gamma_shape() {
        let v = Variogram::exponential(1.0, 5.0, 300.0).unwrap();
        assert_eq!(v.gamma(0.0), 0.0);
        assert_eq!(v.gamma_pair(0.0), 1.0);
        let at_range = v.gamma(300.0);
        assert!((at_range - (1.0 + 4.0 * (1.0 - (-3.0f64).exp()))).abs() < 1e-12);
        assert!(Variogram::exponential(2.0, 1.0, 1.0).is_err());
        assert!(Variogram::exponential(0.0, 1.0, 0.0).is_err());
        assert!(Variogram::exponential(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn empirical_bins_match_brute_force() {
        let s = scattered(1, 60, |r| r.random_range(-90.0..-50.0));
        let bins = empirical_variogram(&s, 5, 2000.0).unwrap();
        // recompute bin 0 directly
        let mut sum = 0.0;
        let mut n = 0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                let h = (s[i].x - s[j].x).hypot(s[i].y - s[j].y);
                if i < j && h > 0.0 && h <= 400.0 {
                    sum += 0.5 * (s[i].value - s[j].value).powi(2);
                    n += 1;
                }
            }
        }
        assert_eq!(bins[0].count, n);
        assert!((bins[0].semivariance - sum / n as f64).abs() < 1e-9);
        assert!(bins.windows(2).all(|w| w[1].lag > w[0].lag));
        assert!(empirical_variogram(&s, 5, 1e-3).is_err());
    }

    #[test]
    fn constant_field_has_no_sill() {
        let s = scattered(2, 50, |_| -70.0);
        let v = fit_variogram(&s, 8, 2500.0).unwrap();
        assert!(v.sill <= 1e-9);
        assert!(v.validate().is_ok());
    }

    #[test]
    fn white_noise_is_pure_nugget() {
        let noise = Normal::new(-70.0, 3.0).unwrap();
        let mut collapsed = 0;
        for seed in 0..20 {
            let s = scattered(100 + seed, 400, |r| noise.sample(r));
            let mean = s.iter().map(|p| p.value).sum::<f64>() / s.len() as f64;
            let var = s.iter().map(|p| (p.value - mean).powi(2)).sum::<f64>() / (s.len() - 1) as f64;
            let v = fit_variogram(&s, 10, 2500.0).unwrap();
            assert!((v.nugget / var - 1.0).abs() < 0.2, "seed {seed}: nugget {} var {var}", v.nugget);
            if v.range <= v.bins[0].lag + 1e-9 {
                collapsed += 1;
            }
        }
        // a 5 % test on 20 independent fields
        assert!(collapsed >= 18, "only {collapsed}/20 white fields collapsed");
    }

    #[test]
    fn f_quantile_matches_tables() {
        // tabulated upper 1 % points of F(2, d)
        for (d, f) in [(5.0, 13.27), (7.0, 9.55), (10.0, 7.56), (20.0, 5.85)] {
            assert!((f2_quantile(d, 0.01) - f).abs() < 0.01, "d={d}");
        }
    }

    #[test]
    fn input_checks() {
        let s = scattered(4, 9, |_| 0.0);
        assert!(matches!(fit_variogram(&s, 8, 100.0), Err(Error::EmptyMeasurements(_))));
        let s = scattered(4, 20, |_| 0.0);
        assert!(fit_variogram(&s, 3, 100.0).is_err());
    }
}
