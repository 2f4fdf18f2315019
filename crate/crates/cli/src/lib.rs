//! Experiment driver behind the `radiomap` binary.
//!
//! Every command reads one run file, derives all randomness from a single
//! seed and writes plain-text artifacts (rasters, CSV, TSV tables, TOML
//! reports) into an output directory. Re-running a command with the same
//! inputs reproduces its outputs byte for byte.

mod apps;
mod context;
mod estimate;
mod evaluate;
mod generate;
mod output;

use std::fmt;
use std::path::PathBuf;

pub use context::Context;

/// Exit status of a failed command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, message: message.into() }
    }

    /// Keeps the exit code of `e` and prefixes its message.
    pub fn context(e: radiomap::Error, what: &str) -> Self {
        let mut c = CliError::from(e);
        c.message = format!("{what}: {}", c.message);
        c
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<radiomap::Error> for CliError {
    fn from(e: radiomap::Error) -> Self {
        let code = match e.kind() {
            radiomap::ErrorKind::Config => EXIT_CONFIG,
            radiomap::ErrorKind::Data => EXIT_DATA,
            radiomap::ErrorKind::Numerical => EXIT_NUMERICAL,
        };
        CliError { code, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Generate,
    Estimate,
    Evaluate,
    Apps,
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Restricts the estimator blocks to these method names.
    pub methods: Option<Vec<String>>,
    pub quiet: bool,
}

pub fn run(command: Command, options: &Options) -> CliResult<()> {
    let ctx = Context::new(options)?;
    match command {
        Command::Generate => generate::run(&ctx),
        Command::Estimate => estimate::run(&ctx),
        Command::Evaluate => evaluate::run(&ctx),
        Command::Apps => apps::run(&ctx),
    }
}
