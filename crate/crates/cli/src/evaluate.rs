use std::fs::File;
use std::path::Path;

use radiomap::analytics::compare_maps;
use radiomap::sensing::read_measurements_csv;
use radiomap::{BandGrid, Error};

use crate::output::{num, read_grid, write_grid, Table};
use crate::{CliError, CliResult, Context};

fn read_band(ctx: &Context, dir: &Path, stem: &str) -> CliResult<BandGrid> {
    let layout = &ctx.scenario.layout;
    let grids = (0..layout.n_channels())
        .map(|k| read_grid(&dir.join(format!("{stem}chan_{k}.grid"))))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(BandGrid::new(grids, layout.channel_centers.clone(), layout.channel_width)?)
}

pub fn run(ctx: &Context) -> CliResult<()> {
    let out = ctx.dir("")?;
    let truth = read_band(ctx, &out.join("truth"), "")?;
    let path = out.join("measurements.csv");
    let f = File::open(&path).map_err(|e| CliError::from(Error::Io { path: path.clone(), source: e }))?;
    let n_sensors = read_measurements_csv(f, *truth.geometry())?.sensors().len();

    let exclude: Vec<(f64, f64)> = ctx.scenario.transmitters.iter().map(|t| (t.x, t.y)).collect();
    let radius = ctx.config.run.analytics.exclusion_radius_cells;
    let err_dir = ctx.dir("errors")?;
    let mut table = Table::new(&["method", "rmse_db", "mae_db", "max_abs_db", "n_cells", "n_sensors", "seed"]);
    for m in &ctx.methods {
        let name = m.name();
        let est = read_band(ctx, &out.join("estimates"), &format!("{name}_"))?;
        let report = compare_maps(&est, &truth, &exclude, radius).map_err(|e| CliError::context(e, name))?;
        for (k, g) in report.errors.grids().iter().enumerate() {
            write_grid(&err_dir.join(format!("{name}_chan_{k}.grid")), g)?;
        }
        ctx.progress(&format!("evaluate: {name} rmse {:.3} dB", report.rmse_db));
        table.row(&[
            name.to_string(),
            num(report.rmse_db),
            num(report.mae_db),
            num(report.max_abs_db),
            report.n_cells.to_string(),
            n_sensors.to_string(),
            ctx.seed.to_string(),
        ]);
    }
    table.write(&out.join("evaluation.tsv"))
}
