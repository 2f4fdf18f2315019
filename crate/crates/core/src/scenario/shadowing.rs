//! Spatially correlated log-normal shadowing.
//!
//! White Gaussian noise is mixed with a radial kernel whose autocorrelation
//! approximates `exp(-d / L)`. The kernel is the square root of the
//! covariance in the frequency domain, computed on a padded torus, then
//! truncated at `3 L` and renormalised to unit energy.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::PropagationParams;
use crate::field::{Geometry, Grid2D, Unit};
use crate::rng;

/// Truncated mixing kernel on a `(2R+1)²` stencil, flattened row-major.
/// Returns `(radius_cells, weights)`; weights outside the disk are zero.
pub fn shadowing_kernel(decorrelation_cells: f64) -> (usize, Vec<f64>) {
    let radius = (3.0 * decorrelation_cells).ceil().max(1.0) as usize;
    let n = (8 * radius + 8).next_power_of_two().max(16);

    let mut buf: Vec<Complex<f64>> = Vec::with_capacity(n * n);
    for i in 0..n {
        let di = i.min(n - i) as f64;
        for j in 0..n {
            let dj = j.min(n - j) as f64;
            let d = di.hypot(dj);
            buf.push(Complex::new((-d / decorrelation_cells).exp(), 0.0));
        }
    }
    fft2(&mut buf, n, false);
    for v in buf.iter_mut() {
        *v = Complex::new(v.re.max(0.0).sqrt(), 0.0);
    }
    fft2(&mut buf, n, true);

    let side = 2 * radius + 1;
    let mut weights = vec![0.0; side * side];
    let r2 = (radius * radius) as f64;
    for a in 0..side {
        for b in 0..side {
            let di = a as isize - radius as isize;
            let dj = b as isize - radius as isize;
            if (di * di + dj * dj) as f64 > r2 {
                continue;
            }
            let i = di.rem_euclid(n as isize) as usize;
            let j = dj.rem_euclid(n as isize) as usize;
            weights[a * side + b] = buf[i * n + j].re;
        }
    }
    let energy: f64 = weights.iter().map(|w| w * w).sum();
    let scale = energy.sqrt().recip();
    weights.iter_mut().for_each(|w| *w *= scale);
    (radius, weights)
}

fn fft2(buf: &mut [Complex<f64>], n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    for row in buf.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = buf[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            buf[i * n + j] = col[i];
        }
    }
    if inverse {
        let s = 1.0 / (n * n) as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }
}

/// Zero-mean Gaussian field in dB with covariance close to
/// `σ² · exp(-d / L)`. Deterministic in `seed`; `σ = 0` gives zeros.
pub fn shadowing_field(p: &PropagationParams, geometry: &Geometry, seed: u64) -> Grid2D {
    let sigma = p.shadowing_sigma_db;
    if sigma == 0.0 {
        return Grid2D::filled(*geometry, 0.0, Unit::Db).expect("validated geometry");
    }
    let (radius, kernel) = shadowing_kernel(p.decorrelation_distance_m / geometry.cell_size);
    let side = 2 * radius + 1;
    let pad_rows = geometry.n_rows + 2 * radius;
    let pad_cols = geometry.n_cols + 2 * radius;

    let mut r = rng::substream(seed, "white", 0);
    let white: Vec<f64> = (0..pad_rows * pad_cols)
        .map(|_| StandardNormal.sample(&mut r))
        .collect();

    let taps: Vec<(usize, usize, f64)> = (0..side)
        .flat_map(|a| (0..side).map(move |b| (a, b)))
        .filter_map(|(a, b)| {
            let w = kernel[a * side + b];
            (w != 0.0).then_some((a, b, w))
        })
        .collect();

    let n_cols = geometry.n_cols;
    let values: Vec<f64> = (0..geometry.n_rows)
        .into_par_iter()
        .flat_map_iter(|row| {
            let white = &white;
            let taps = &taps;
            (0..n_cols).map(move |col| {
                let mut acc = 0.0;
                for &(a, b, w) in taps {
                    acc += w * white[(row + a) * pad_cols + col + b];
                }
                sigma * acc
            })
        })
        .collect();
    Grid2D::new(*geometry, values, Unit::Db).expect("validated geometry")
}
