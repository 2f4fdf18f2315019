use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SCENARIO: &str = r#"
seed = 5
[area]
width_m = 3000.0
height_m = 2000.0
cell_size_m = 100.0
[band]
channel_centers_hz = [100e6, 101e6]
channel_width_hz = 1e6
[propagation]
pathloss_exponent = 3.0
shadowing_sigma_db = 3.0
decorrelation_distance_m = 300.0
noise_floor_dbw = -140.0
[[transmitters]]
id = 1
x = 750.0
y = 650.0
power_w = 1.0
[[transmitters]]
id = 2
x = 2250.0
y = 1350.0
power_w = 2.0
channel = 1
[[obstacles]]
x0 = 1500.0
y0 = 100.0
x1 = 1500.0
y1 = 1900.0
penetration_loss_db = 15.0
"#;

const RUN: &str = r#"
scenario = "scenario.toml"
out_dir = "out"
[sensing]
n_sensors = 60
noise_sigma_db = 0.5
[[estimators]]
method = "kriging"
[[estimators]]
method = "idw"
[[estimators]]
method = "model_based"
n_tx = 1
[temporal]
epochs = 4
window_length = 2
method = "idw"
tile_size = 8
[analytics]
[[analytics.routes]]
waypoints = [[200.0, 650.0], [2800.0, 650.0]]
serving = [1]
step_m = 100.0
[analytics.anomaly]
k_sigma = 5.0
[analytics.anomaly.rogue]
x = 2450.0
y = 350.0
power_w = 0.5
[[analytics.storage]]
width_km = 20.0
height_km = 20.0
cell_m = 20.0
band_mhz = 120.0
channel_mhz = 3.0
duration_h = 24.0
step_min = 10.0
bits_per_px = 8
"#;

fn setup(run: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("scenario.toml"), SCENARIO).unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, run).unwrap();
    (dir, cfg)
}

fn radiomap(args: &[&str], cfg: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radiomap"))
        .args(args)
        .arg("--quiet")
        .arg("--config")
        .arg(cfg)
        .output()
        .unwrap()
}

fn ok(args: &[&str], cfg: &Path) {
    let o = radiomap(args, cfg);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn tsv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

#[test]
fn full_pipeline_writes_documented_layout() {
    let (dir, cfg) = setup(RUN);
    for cmd in ["generate", "estimate", "evaluate", "apps"] {
        ok(&[cmd], &cfg);
    }
    let out = dir.path().join("out");
    for f in [
        "truth/chan_0.grid",
        "truth/chan_1.grid",
        "truth/gain_tx1.grid",
        "truth/gain_tx2.grid",
        "scenario.toml",
        "measurements.csv",
        "fits.toml",
        "estimates/kriging_chan_1.grid",
        "estimates/model_based_chan_0.grid",
        "errors/idw_chan_0.grid",
        "dead_zones_chan_0.grid",
        "dead_zones_chan_1.grid",
        "route_0.tsv",
        "tiles/tiling.toml",
        "anomaly/mask_chan_1.grid",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }

    let eval = tsv(&out.join("evaluation.tsv"));
    assert_eq!(eval[0], ["method", "rmse_db", "mae_db", "max_abs_db", "n_cells", "n_sensors", "seed"]);
    assert_eq!(eval.len(), 4);
    assert!(eval[1..].iter().all(|r| r[5] == "60" && r[6] == "5"));

    let storage = tsv(&out.join("storage.tsv"));
    assert_eq!(storage[1][8], "46080000000");

    let series = tsv(&out.join("series.tsv"));
    assert_eq!(series.len(), 5);
    // the first epoch rewrites every tile
    assert_eq!(series[1][5], "1.000000");

    // route crosses the wall at x = 1500 m: SINR east of it sits well below the west side
    let route = tsv(&out.join("route_0.tsv"));
    let sinr = |x: f64| -> f64 {
        route[1..]
            .iter()
            .find(|r| (r[1].parse::<f64>().unwrap() - x).abs() < 1e-6)
            .map(|r| r[4].parse().unwrap())
            .unwrap()
    };
    assert!(sinr(1400.0) - sinr(1600.0) > 10.0);

    let anomaly = fs::read_to_string(out.join("anomaly.toml")).unwrap();
    assert!(anomaly.contains("[estimate]"), "{anomaly}");
    assert!(anomaly.contains("channel = 0"));
}

#[test]
fn methods_flag_restricts_estimators() {
    let (dir, cfg) = setup(RUN);
    ok(&["estimate", "--methods", "idw"], &cfg);
    let est = dir.path().join("out/estimates");
    assert!(est.join("idw_chan_0.grid").is_file());
    assert!(!est.join("kriging_chan_0.grid").exists());
    let o = radiomap(&["estimate", "--methods", "rbf"], &cfg);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_and_out_overrides() {
    let (dir, cfg) = setup(RUN);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["generate", "--seed", "1", "--out", a.to_str().unwrap()], &cfg);
    ok(&["generate", "--seed", "2", "--out", b.to_str().unwrap()], &cfg);
    let ta = fs::read(a.join("truth/chan_0.grid")).unwrap();
    let tb = fs::read(b.join("truth/chan_0.grid")).unwrap();
    assert_ne!(ta, tb);
    assert!(fs::read_to_string(a.join("scenario.toml")).unwrap().contains("seed = 1"));
}

#[test]
fn exit_codes() {
    let (dir, cfg) = setup(RUN);
    // missing config file
    assert_eq!(radiomap(&["generate"], &dir.path().join("nope.toml")).status.code(), Some(2));
    // unknown key
    let (_d, bad) = setup(&RUN.replace("noise_sigma_db", "noise_db"));
    let o = radiomap(&["generate"], &bad);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    // evaluate before anything exists
    assert_eq!(radiomap(&["evaluate"], &cfg).status.code(), Some(3));
    // zero sensors
    let (_d, empty) = setup(&RUN.replace("n_sensors = 60", "n_sensors = 0"));
    assert_eq!(radiomap(&["estimate"], &empty).status.code(), Some(3));
    // a Gaussian kernel far wider than the area makes the RBF system singular
    let (_d, singular) = setup(&RUN.replace(
        "[[estimators]]\nmethod = \"kriging\"",
        "[[estimators]]\nmethod = \"rbf\"\nkind = \"gaussian\"\nshape = 1e9",
    ));
    let o = radiomap(&["estimate", "--methods", "rbf"], &singular);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rbf"));
}
