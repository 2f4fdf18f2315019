//! Python bindings: CLI commands, ground truth, single-channel estimation
//! and the path-loss fit, with grids exchanged as nested lists (north row
//! first).

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use radiomap::config::ScenarioFile;
use radiomap::estimate::{fit_pathloss_single, Bounds, FittedEstimator, MethodConfig};
use radiomap::scenario::generate_ground_truth;
use radiomap::sensing::Sample;
use radiomap::{Geometry, Grid2D};
use radiomap_cli::{Command, Options};

create_exception!(radiomap, RadiomapError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    RadiomapError::new_err(e.to_string())
}

fn rows(g: &Grid2D) -> Vec<Vec<f64>> {
    g.values().chunks(g.n_cols()).map(<[f64]>::to_vec).collect()
}

fn samples(points: Vec<(f64, f64, f64)>) -> Vec<Sample> {
    points.into_iter().map(|(x, y, value)| Sample { x, y, value }).collect()
}

/// Runs one CLI command (`generate`, `estimate`, `evaluate` or `apps`).
/// Failures raise `RadiomapError(message, exit_code)`.
#[pyfunction]
#[pyo3(signature = (command, config, out=None, seed=None, methods=None))]
fn run(command: &str, config: PathBuf, out: Option<PathBuf>, seed: Option<u64>, methods: Option<Vec<String>>) -> PyResult<()> {
    let command = match command {
        "generate" => Command::Generate,
        "estimate" => Command::Estimate,
        "evaluate" => Command::Evaluate,
        "apps" => Command::Apps,
        other => return Err(RadiomapError::new_err((format!("unknown command {other}"), 2))),
    };
    let options = Options { config, out, seed, methods, quiet: true };
    radiomap_cli::run(command, &options).map_err(|e| RadiomapError::new_err((e.message, e.code)))
}

/// Ground-truth dB maps of a scenario file, one row list per channel.
#[pyfunction]
#[pyo3(signature = (scenario, seed=None))]
fn ground_truth_db(scenario: PathBuf, seed: Option<u64>) -> PyResult<Vec<Vec<Vec<f64>>>> {
    let s = ScenarioFile::load(&scenario).and_then(|f| f.build(seed)).map_err(err)?;
    let truth = generate_ground_truth(&s).map_err(err)?.to_db();
    Ok(truth.grids().iter().map(rows).collect())
}

/// Dense estimate from `(x, y, value_db)` points. `method` is an estimator
/// block in TOML, e.g. `'method = "kriging"'`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn estimate_grid(
    points: Vec<(f64, f64, f64)>,
    method: &str,
    origin_x: f64,
    origin_y: f64,
    cell_size: f64,
    n_rows: usize,
    n_cols: usize,
) -> PyResult<Vec<Vec<f64>>> {
    let config: MethodConfig = toml::from_str(method).map_err(err)?;
    let geo = Geometry::new(origin_x, origin_y, cell_size, n_rows, n_cols).map_err(err)?;
    let est = FittedEstimator::fit(&samples(points), &config, &geo).map_err(err)?;
    Ok(rows(&est.predict_grid(&geo).map_err(err)?))
}

/// Log-distance fit of one transmitter:
/// `(x, y, ref_power_db, exponent, residual_rms, ill_conditioned)`.
#[pyfunction]
fn fit_pathloss(
    points: Vec<(f64, f64, f64)>,
    init: (f64, f64),
    bounds: (f64, f64, f64, f64),
    d_min: f64,
) -> PyResult<(f64, f64, f64, f64, f64, bool)> {
    let b = Bounds { x_min: bounds.0, y_min: bounds.1, x_max: bounds.2, y_max: bounds.3 };
    let f = fit_pathloss_single(&samples(points), init, b, d_min).map_err(err)?;
    Ok((f.x, f.y, f.ref_power_db, f.exponent, f.residual_rms, f.ill_conditioned))
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn storage_size_bits(
    width_km: f64,
    height_km: f64,
    cell_m: f64,
    band_mhz: f64,
    channel_mhz: f64,
    duration_h: f64,
    step_min: f64,
    bits_per_px: u32,
) -> PyResult<u128> {
    radiomap::temporal::storage_size_bits(width_km, height_km, cell_m, band_mhz, channel_mhz, duration_h, step_min, bits_per_px)
        .map_err(err)
}

#[pymodule(name = "radiomap")]
fn radiomap_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RadiomapError", m.py().get_type::<RadiomapError>())?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(ground_truth_db, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_grid, m)?)?;
    m.add_function(wrap_pyfunction!(fit_pathloss, m)?)?;
    m.add_function(wrap_pyfunction!(storage_size_bits, m)?)?;
    Ok(())
}
