use std::fs::File;

use radiomap::estimate::{estimate_map_with_fits, PathLossFit, Variogram};
use radiomap::sensing::write_measurements_csv;
use radiomap::Error;
use serde::Serialize;

use crate::output::{write_grid, write_toml};
use crate::{CliError, CliResult, Context};

#[derive(Serialize)]
struct FitsReport {
    seed: u64,
    n_sensors: usize,
    n_rejected: usize,
    methods: Vec<MethodFits>,
}

#[derive(Serialize)]
struct MethodFits {
    method: String,
    channels: Vec<ChannelFit>,
}

#[derive(Serialize)]
struct ChannelFit {
    channel: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    variogram: Option<Variogram>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    transmitters: Vec<PathLossFit>,
}

pub fn run(ctx: &Context) -> CliResult<()> {
    let truth = ctx.truth()?;
    let ms = ctx.measure(&truth, 0)?;
    let out = ctx.dir("")?;
    let path = out.join("measurements.csv");
    let f = File::create(&path).map_err(|e| CliError::from(Error::Io { path: path.clone(), source: e }))?;
    write_measurements_csv(&ms, f)?;
    ctx.progress(&format!(
        "estimate: {} sensors, {} rejected readings, seed {}",
        ms.sensors().len(),
        ms.rejected_count(),
        ctx.seed
    ));

    let dir = ctx.dir("estimates")?;
    let layout = &ctx.scenario.layout;
    let mut methods = Vec::new();
    for m in &ctx.methods {
        let name = m.name();
        ctx.progress(&format!("  {name}"));
        let (map, fitted) = estimate_map_with_fits(&ms, m, layout).map_err(|e| CliError::context(e, name))?;
        for (k, g) in map.grids().iter().enumerate() {
            write_grid(&dir.join(format!("{name}_chan_{k}.grid")), g)?;
        }
        let channels = fitted
            .iter()
            .enumerate()
            .map(|(k, f)| ChannelFit {
                channel: k,
                variogram: f.variogram().cloned(),
                transmitters: f.pathloss_fits().map(<[_]>::to_vec).unwrap_or_default(),
            })
            .collect();
        methods.push(MethodFits { method: name.to_string(), channels });
    }
    let report = FitsReport {
        seed: ctx.seed,
        n_sensors: ms.sensors().len(),
        n_rejected: ms.rejected_count(),
        methods,
    };
    write_toml(&out.join("fits.toml"), &report)
}
