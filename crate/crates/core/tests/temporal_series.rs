use radiomap::analytics::compare_maps;
use radiomap::estimate::{estimate_map, MethodConfig};
use radiomap::field::BandLayout;
use radiomap::scenario::{generate_ground_truth, PropagationParams, Scenario, Transmitter};
use radiomap::sensing::{place_sensors, synthesize_measurements, Placement};
use radiomap::temporal::{MapSeries, TileStore, Tiling};
use radiomap::Geometry;

fn scenario(seed: u64, txs: &[(u32, f64, f64)]) -> Scenario {
    let layout = BandLayout {
        geometry: Geometry::new(0.0, 0.0, 100.0, 40, 40).unwrap(),
        channel_centers: vec![100e6],
        channel_width: 1e6,
    };
    let transmitters = txs
        .iter()
        .map(|&(id, x, y)| Transmitter { id, x, y, tx_power_w: 1.0, channel: 0, reference_gain_db: -12.4 })
        .collect();
    let propagation = PropagationParams {
        pathloss_exponent: 3.0,
        shadowing_sigma_db: 4.0,
        decorrelation_distance_m: 400.0,
        noise_floor_dbw: -140.0,
    };
    Scenario::new(layout, transmitters, vec![], propagation, seed).unwrap()
}

#[test]
fn window_beats_single_epoch_under_measurement_noise() {
    // weights 1, 1/2, 1/3, 1/4 shrink the per-sensor noise variance to
    // Σw² / (Σw)² ≈ 0.33 of a single epoch's
    let config = MethodConfig::Idw { d_exp: 2.0 };
    let (mut windowed, mut single) = (0.0, 0.0);
    for seed in 0..5 {
        let s = scenario(seed, &[(1, 1200.0, 1300.0), (2, 2900.0, 2600.0)]);
        let truth = generate_ground_truth(&s).unwrap();
        let truth_db = truth.to_db();
        let sensors = place_sensors(s.geometry(), 150, &Placement::UniformRandom, seed).unwrap();
        let mut series = MapSeries::new(s.layout.clone(), 4).unwrap();
        let exclude = [(1200.0, 1300.0), (2900.0, 2600.0)];
        for t in 0..10 {
            let ms = synthesize_measurements(&truth, &sensors, 3.0, seed, t).unwrap();
            let one = estimate_map(&ms, &config, &s.layout).unwrap();
            let win = series.window_update(ms, &config).unwrap();
            if t >= 3 {
                windowed += compare_maps(&win.estimate, &truth_db, &exclude, 1.0).unwrap().rmse_db;
                single += compare_maps(&one, &truth_db, &exclude, 1.0).unwrap().rmse_db;
            }
        }
    }
    assert!(windowed < single, "windowed {windowed} vs single {single}");
}

#[test]
fn moving_transmitter_touches_only_part_of_the_tiles() {
    let before = scenario(3, &[(1, 800.0, 900.0), (2, 3100.0, 3200.0)]);
    let after = scenario(3, &[(1, 1100.0, 1000.0), (2, 3100.0, 3200.0)]);
    let m0 = generate_ground_truth(&before).unwrap().to_db();
    let m1 = generate_ground_truth(&after).unwrap().to_db();
    let tiling = Tiling::new(before.layout.clone(), 8, 10).unwrap();
    let mut store = TileStore::new(tiling.clone());
    store.incremental_update(0, &m0, 1.0).unwrap();
    let up = store.incremental_update(1, &m1, 1.0).unwrap();
    assert!(up.fraction_changed > 0.0 && up.fraction_changed < 1.0, "{}", up.fraction_changed);

    // oracle: a tile is rewritten iff some cell moved by more than the
    // threshold since it was last written (here: epoch 0)
    let rebuilt = store.reconstruct(1).unwrap();
    for key in tiling.keys() {
        let old = tiling.cut(m0.channel(0), key);
        let new = tiling.cut(m1.channel(0), key);
        let shift = old.iter().zip(&new).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let updated = up.updated.contains(&key);
        assert_eq!(updated, shift > 1.0, "{key:?}");
        // rewritten tiles are exact up to quantization; stale ones also
        // carry the sub-threshold drift
        let bound = store.tile(key).unwrap().error_bound() + if updated { 0.0 } else { shift };
        let got = tiling.cut(rebuilt.channel(0), key);
        for (a, b) in got.iter().zip(&new) {
            assert!((a - b).abs() <= bound + 1e-9, "{key:?}: {a} vs {b}");
        }
    }
    // the tile holding the transmitter's new position changed
    let (r, c) = before.geometry().cell_of(1100.0, 1000.0).unwrap();
    assert!(up.updated.iter().any(|k| {
        let (r0, nr, c0, nc) = tiling.extent(*k);
        (r0..r0 + nr).contains(&r) && (c0..c0 + nc).contains(&c)
    }));
}
