use radiomap::field::BandLayout;
use radiomap::scenario::{channel_gain_map, Obstacle, PropagationParams, Transmitter};
use serde::Serialize;

use crate::output::{write_grid, write_toml};
use crate::{CliResult, Context};

/// Fully resolved scenario, random walls included.
#[derive(Serialize)]
struct ScenarioEcho<'a> {
    seed: u64,
    layout: &'a BandLayout,
    propagation: &'a PropagationParams,
    transmitters: &'a [Transmitter],
    obstacles: &'a [Obstacle],
}

pub fn run(ctx: &Context) -> CliResult<()> {
    let s = &ctx.scenario;
    ctx.progress(&format!(
        "generate: {}x{} cells, {} channels, {} transmitters, seed {}",
        s.geometry().n_rows,
        s.geometry().n_cols,
        s.layout.n_channels(),
        s.transmitters.len(),
        ctx.seed
    ));
    let truth = ctx.truth()?.to_db();
    let dir = ctx.dir("truth")?;
    for (k, g) in truth.grids().iter().enumerate() {
        write_grid(&dir.join(format!("chan_{k}.grid")), g)?;
    }
    for tx in &s.transmitters {
        write_grid(&dir.join(format!("gain_tx{}.grid", tx.id)), &channel_gain_map(s, tx.id)?)?;
    }
    let echo = ScenarioEcho {
        seed: ctx.seed,
        layout: &s.layout,
        propagation: &s.propagation,
        transmitters: &s.transmitters,
        obstacles: &s.obstacles,
    };
    write_toml(&ctx.dir("")?.join("scenario.toml"), &echo)
}
