use radiomap::analytics::{compare_maps, dead_zones, detect_anomaly, locate_rogue, mask_grid, sinr_at, RogueEstimate};
use radiomap::config::{free_space_reference_gain_db, RogueConfig, TemporalConfig};
use radiomap::estimate::map::channel_samples;
use radiomap::estimate::{estimate_map, estimate_map_with_fits, FittedEstimator, MethodConfig};
use radiomap::scenario::{channel_gain_map, generate_ground_truth, Transmitter};
use radiomap::temporal::tiles::{TileStore, Tiling};
use radiomap::temporal::{storage_size_bits, MapSeries};
use radiomap::sensing::MeasurementSet;
use radiomap::{BandGrid, Grid2D};
use serde::Serialize;

use crate::output::{num, write_grid, write_toml, Table};
use crate::{CliError, CliResult, Context};

pub fn run(ctx: &Context) -> CliResult<()> {
    let truth = ctx.truth()?;
    storage(ctx)?;
    let gains = ctx
        .scenario
        .transmitters
        .iter()
        .map(|t| channel_gain_map(&ctx.scenario, t.id))
        .collect::<radiomap::Result<Vec<Grid2D>>>()?;
    coverage(ctx, &truth, &gains)?;
    routes(ctx, &truth, &gains)?;
    if let Some(t) = &ctx.config.run.temporal {
        let series = temporal(ctx, &truth, t)?;
        if let Some(a) = &ctx.config.run.analytics.anomaly {
            anomaly(ctx, &series, t, a.k_sigma, a.rogue.as_ref())?;
        }
    }
    Ok(())
}

fn storage(ctx: &Context) -> CliResult<()> {
    let mut table = Table::new(&[
        "width_km", "height_km", "cell_m", "band_mhz", "channel_mhz", "duration_h", "step_min", "bits_per_px", "bits",
        "gigabits",
    ]);
    for r in &ctx.config.run.analytics.storage {
        let bits = storage_size_bits(
            r.width_km,
            r.height_km,
            r.cell_m,
            r.band_mhz,
            r.channel_mhz,
            r.duration_h,
            r.step_min,
            r.bits_per_px,
        )
        .map_err(|e| CliError::config(e.to_string()))?;
        table.row(&[
            r.width_km.to_string(),
            r.height_km.to_string(),
            r.cell_m.to_string(),
            r.band_mhz.to_string(),
            r.channel_mhz.to_string(),
            r.duration_h.to_string(),
            r.step_min.to_string(),
            r.bits_per_px.to_string(),
            bits.to_string(),
            format!("{:.3}", bits as f64 / 1e9),
        ]);
    }
    table.write(&ctx.dir("")?.join("storage.tsv"))
}

/// Dead zones per channel, served by the transmitters on that channel.
fn coverage(ctx: &Context, truth: &BandGrid, gains: &[Grid2D]) -> CliResult<()> {
    let s = &ctx.scenario;
    let a = &ctx.config.run.analytics;
    let dir = ctx.dir("")?;
    let geo = *s.geometry();
    let mut table = Table::new(&["channel", "component", "n_cells", "area_m2", "centroid_x_m", "centroid_y_m"]);
    let mut summary = Table::new(&["channel", "dead_fraction", "n_components"]);
    for k in 0..s.layout.n_channels() {
        let on: Vec<usize> = (0..s.transmitters.len()).filter(|&i| s.transmitters[i].channel == k).collect();
        if on.is_empty() {
            continue;
        }
        let g: Vec<Grid2D> = on.iter().map(|&i| gains[i].clone()).collect();
        let p: Vec<f64> = on.iter().map(|&i| s.transmitters[i].tx_power_w).collect();
        let cov = dead_zones(&g, truth.channel(k), &p, s.propagation.noise_floor_dbw, a.sinr_threshold_db)?;
        write_grid(&dir.join(format!("dead_zones_chan_{k}.grid")), &mask_grid(&geo, &cov.dead)?)?;
        for (c, cells) in cov.components.iter().enumerate() {
            let (mut cx, mut cy) = (0.0, 0.0);
            for &i in cells {
                let (x, y) = geo.cell_center(i / geo.n_cols, i % geo.n_cols);
                cx += x;
                cy += y;
            }
            let n = cells.len() as f64;
            table.row(&[
                k.to_string(),
                c.to_string(),
                cells.len().to_string(),
                num(n * geo.cell_area()),
                num(cx / n),
                num(cy / n),
            ]);
        }
        summary.row(&[k.to_string(), num(cov.dead_fraction()), cov.components.len().to_string()]);
    }
    table.write(&dir.join("dead_zones.tsv"))?;
    summary.write(&dir.join("dead_zones_summary.tsv"))
}

fn routes(ctx: &Context, truth: &BandGrid, gains: &[Grid2D]) -> CliResult<()> {
    let s = &ctx.scenario;
    let a = &ctx.config.run.analytics;
    let ids: Vec<u32> = s.transmitters.iter().map(|t| t.id).collect();
    let powers: Vec<f64> = s.transmitters.iter().map(|t| t.tx_power_w).collect();
    for (i, rc) in a.routes.iter().enumerate() {
        let route = rc.route(&ids).map_err(|e| CliError::config(format!("route {i}: {e}")))?;
        let mut table = Table::new(&["index", "x_m", "y_m", "server_id", "sinr_db", "below_threshold"]);
        for (w, &(x, y)) in route.waypoints.iter().enumerate() {
            let server = route.server_at(w);
            let interference = truth.channel(s.transmitters[server].channel);
            let v = sinr_at(x, y, server, gains, interference, &powers, s.propagation.noise_floor_dbw)
                .map_err(|e| CliError::context(e, &format!("route {i}")))?;
            table.row(&[
                w.to_string(),
                num(x),
                num(y),
                ids[server].to_string(),
                num(v),
                u8::from(v < a.sinr_threshold_db).to_string(),
            ]);
        }
        table.write(&ctx.dir("")?.join(format!("route_{i}.tsv")))?;
    }
    Ok(())
}

/// Runs the sliding-window series over a static truth with fresh
/// measurement noise per epoch and keeps a tile store of the estimates.
/// Returns the series of single-epoch estimates.
fn temporal(ctx: &Context, truth: &BandGrid, t: &TemporalConfig) -> CliResult<MapSeries> {
    let method = ctx
        .config
        .estimator(&t.method)
        .ok_or_else(|| CliError::config(format!("no estimator block named {}", t.method)))?;
    let name = method.name();
    let layout = &ctx.scenario.layout;
    let mut series = MapSeries::new(layout.clone(), t.window_length)?;
    // single-epoch estimates double as the anomaly baseline: their spread is
    // the one a fresh snapshot has to be judged against
    let mut snapshots = MapSeries::new(layout.clone(), 1)?;
    let tiling = Tiling::new(layout.clone(), t.tile_size, t.n_bits).map_err(|e| CliError::config(e.to_string()))?;
    let mut store = TileStore::new(tiling);
    let exclude: Vec<(f64, f64)> = ctx.scenario.transmitters.iter().map(|x| (x.x, x.y)).collect();
    let radius = ctx.config.run.analytics.exclusion_radius_cells;
    let truth_db = truth.to_db();
    let mut table = Table::new(&["epoch", "window", "windowed_rmse_db", "single_rmse_db", "tiles_updated", "fraction_changed"]);
    for e in 0..t.epochs {
        let ms = ctx.measure(truth, e)?;
        let single = snapshots.window_update(ms.clone(), method).map_err(|err| CliError::context(err, name))?;
        let single = compare_maps(&single.estimate, &truth_db, &exclude, radius)?;
        let epoch = series.window_update(ms, method).map_err(|err| CliError::context(err, name))?;
        let windowed = compare_maps(&epoch.estimate, &truth_db, &exclude, radius)?;
        let update = store.incremental_update(e, &epoch.estimate, t.change_threshold_db)?;
        table.row(&[
            e.to_string(),
            series.window().count().to_string(),
            num(windowed.rmse_db),
            num(single.rmse_db),
            update.updated.len().to_string(),
            num(update.fraction_changed),
        ]);
    }
    ctx.progress(&format!("apps: {} epochs of {name}", t.epochs));
    store.write_dir(&ctx.dir("tiles")?)?;
    table.write(&ctx.dir("")?.join("series.tsv"))?;
    Ok(snapshots)
}

#[derive(Serialize)]
struct AnomalyFile {
    k_sigma: f64,
    time_index: u64,
    n_flagged: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    injected: Option<RogueConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate: Option<RogueEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    localization_error_m: Option<f64>,
    clusters: Vec<ClusterRow>,
}

#[derive(Serialize)]
struct ClusterRow {
    channel: usize,
    n_cells: usize,
    centroid_x: f64,
    centroid_y: f64,
    mean_deviation_db: f64,
}

/// Tests the epoch after the series, optionally with an injected rogue
/// transmitter, against the series history.
fn anomaly(ctx: &Context, series: &MapSeries, t: &TemporalConfig, k_sigma: f64, rogue: Option<&RogueConfig>) -> CliResult<()> {
    let s = &ctx.scenario;
    let mut scenario = s.clone();
    if let Some(r) = rogue {
        let center = *s
            .layout
            .channel_centers
            .get(r.channel)
            .ok_or_else(|| CliError::config(format!("rogue channel {} outside the band", r.channel)))?;
        scenario.transmitters.push(Transmitter {
            id: s.transmitters.iter().map(|t| t.id).max().map_or(0, |m| m + 1),
            x: r.x,
            y: r.y,
            tx_power_w: r.power_w,
            channel: r.channel,
            reference_gain_db: free_space_reference_gain_db(center),
        });
    }
    let truth = generate_ground_truth(&scenario)?;
    let time_index = t.epochs;
    let ms = ctx.measure(&truth, time_index)?;
    let method = ctx.config.estimator(&t.method).expect("validated temporal method");
    let reference = &series.latest().expect("at least one epoch").measurements;
    let current = frozen_estimate(&ms, reference, method, &s.layout).map_err(|e| CliError::context(e, method.name()))?;
    let report = detect_anomaly(series, &current, k_sigma)?;
    let estimate = if report.clusters.iter().any(|c| c.mean_deviation_db > 0.0) {
        Some(locate_rogue(&report, &current)?)
    } else {
        None
    };
    let localization_error_m = match (rogue, &estimate) {
        (Some(r), Some(e)) => Some((e.x - r.x).hypot(e.y - r.y)),
        _ => None,
    };
    let dir = ctx.dir("anomaly")?;
    for (k, f) in report.flagged.iter().enumerate() {
        write_grid(&dir.join(format!("mask_chan_{k}.grid")), &mask_grid(s.geometry(), f)?)?;
    }
    let file = AnomalyFile {
        k_sigma,
        time_index,
        n_flagged: report.n_flagged(),
        injected: rogue.cloned(),
        estimate,
        localization_error_m,
        clusters: report
            .clusters
            .iter()
            .map(|c| ClusterRow {
                channel: c.channel,
                n_cells: c.cells.len(),
                centroid_x: c.centroid.0,
                centroid_y: c.centroid.1,
                mean_deviation_db: c.mean_deviation_db,
            })
            .collect(),
    };
    ctx.progress(&format!("apps: {} anomalous cells", file.n_flagged));
    write_toml(&ctx.dir("")?.join("anomaly.toml"), &file)
}

/// Estimate of `current` with any data-driven variogram frozen at its fit on
/// `reference`, so that a local anomaly does not reshape the whole map
/// through a refitted variogram.
fn frozen_estimate(
    current: &MeasurementSet,
    reference: &MeasurementSet,
    method: &MethodConfig,
    layout: &radiomap::field::BandLayout,
) -> radiomap::Result<BandGrid> {
    let data_driven = matches!(method, MethodConfig::Kriging { nugget, sill, range, .. }
        if nugget.is_none() || sill.is_none() || range.is_none());
    if !data_driven {
        return estimate_map(current, method, layout);
    }
    let (_, fitted) = estimate_map_with_fits(reference, method, layout)?;
    let geo = &layout.geometry;
    let mut grids = Vec::with_capacity(fitted.len());
    for (k, f) in fitted.iter().enumerate() {
        let v = f.variogram().expect("Kriging estimator carries a variogram");
        let frozen = MethodConfig::Kriging {
            n_bins: None,
            max_lag: None,
            nugget: Some(v.nugget),
            sill: Some(v.sill),
            range: Some(v.range),
        };
        grids.push(FittedEstimator::fit(&channel_samples(current, k), &frozen, geo)?.predict_grid(geo)?);
    }
    BandGrid::new(grids, layout.channel_centers.clone(), layout.channel_width)
}
