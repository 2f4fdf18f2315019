use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use radiomap_cli::{run, Command, Options};

#[derive(Parser)]
#[command(name = "radiomap", version, about = "Radio map synthesis, reconstruction and analytics")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Run configuration file (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the run file)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Global seed (overrides the run and scenario files)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Comma-separated estimator names to run, e.g. idw,kriging
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<String>>,

    /// Suppress progress messages
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Ground-truth maps and per-transmitter channel gains
    Generate,
    /// Simulated measurements and map estimates
    Estimate,
    /// Error tables of the estimates against the truth
    Evaluate,
    /// Dead zones, route SINR, time series, anomaly report and storage table
    Apps,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let command = match cli.command {
        Cmd::Generate => Command::Generate,
        Cmd::Estimate => Command::Estimate,
        Cmd::Evaluate => Command::Evaluate,
        Cmd::Apps => Command::Apps,
    };
    let options = Options {
        config,
        out: cli.out,
        seed: cli.seed,
        methods: cli.methods,
        quiet: cli.quiet,
    };
    match run(command, &options) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
