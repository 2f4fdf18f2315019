use radiomap::estimate::fit_variogram;
use radiomap::scenario::{shadowing_field, PropagationParams};
use radiomap::sensing::Sample;
use radiomap::Geometry;
use rand::{Rng, SeedableRng};

fn params(decorrelation: f64) -> PropagationParams {
    PropagationParams {
        pathloss_exponent: 3.0,
        shadowing_sigma_db: 6.0,
        decorrelation_distance_m: decorrelation,
        noise_floor_dbw: -130.0,
    }
}

fn fitted_range(seed: u64, decorrelation: f64) -> f64 {
    let g = Geometry::new(0.0, 0.0, 50.0, 200, 200).unwrap();
    let field = shadowing_field(&params(decorrelation), &g, seed);
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let s: Vec<Sample> = (0..500)
        .map(|_| {
            let x = r.random_range(0.0..g.width());
            let y = r.random_range(0.0..g.height());
            Sample { x, y, value: field.sample_bilinear(x, y).unwrap() }
        })
        .collect();
    fit_variogram(&s, 15, 4_000.0).unwrap().range
}

#[test]
fn practical_range_recovered_from_generated_shadowing() {
    let mut ranges: Vec<f64> = (0..10).map(|seed| fitted_range(seed, 500.0)).collect();
    ranges.sort_by(f64::total_cmp);
    let median = 0.5 * (ranges[4] + ranges[5]);
    let expected = 3.0 * 500.0;
    assert!((median / expected - 1.0).abs() <= 0.5, "median {median}, all {ranges:?}");
}
