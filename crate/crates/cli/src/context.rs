use std::fs;
use std::path::PathBuf;

use radiomap::config::RunConfig;
use radiomap::estimate::MethodConfig;
use radiomap::scenario::{generate_ground_truth, Scenario};
use radiomap::sensing::{filter_bad_data, place_sensors, quantize_measurements, synthesize_measurements, MeasurementSet};
use radiomap::{BandGrid, Error};

use crate::{CliError, CliResult, Options};

/// Loaded configuration plus everything derived from the seed.
#[derive(Debug)]
pub struct Context {
    pub config: RunConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub scenario: Scenario,
    pub methods: Vec<MethodConfig>,
    quiet: bool,
}

impl Context {
    pub fn new(options: &Options) -> CliResult<Self> {
        let config = RunConfig::load(&options.config).map_err(|e| CliError::config(e.to_string()))?;
        let seed = config.seed(options.seed);
        let out = options
            .out
            .clone()
            .or_else(|| config.run.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        let scenario = config.scenario_file.build(Some(seed)).map_err(|e| CliError::config(e.to_string()))?;
        let methods: Vec<MethodConfig> = match &options.methods {
            None => config.run.estimators.clone(),
            Some(names) => {
                let mut picked = Vec::new();
                for n in names {
                    let m = config
                        .estimator(n)
                        .ok_or_else(|| CliError::config(format!("no estimator block named {n}")))?;
                    picked.push(m.clone());
                }
                picked
            }
        };
        Ok(Context { config, seed, out, scenario, methods, quiet: options.quiet })
    }

    pub fn progress(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    pub fn dir(&self, sub: &str) -> CliResult<PathBuf> {
        let d = if sub.is_empty() { self.out.clone() } else { self.out.join(sub) };
        fs::create_dir_all(&d).map_err(|e| CliError::from(Error::Io { path: d.clone(), source: e }))?;
        Ok(d)
    }

    pub fn truth(&self) -> CliResult<BandGrid> {
        Ok(generate_ground_truth(&self.scenario)?)
    }

    /// Sensor readings of `truth` at `time_index`, after optional
    /// quantization and bad-data filtering.
    pub fn measure(&self, truth: &BandGrid, time_index: u64) -> CliResult<MeasurementSet> {
        let s = &self.config.run.sensing;
        if s.n_sensors == 0 {
            return Err(Error::EmptyMeasurements("the sensing block places zero sensors".into()).into());
        }
        let sensors = place_sensors(truth.geometry(), s.n_sensors, &s.placement.placement(), self.seed)
            .map_err(|e| CliError::config(e.to_string()))?;
        let mut ms = synthesize_measurements(truth, &sensors, s.noise_sigma_db, self.seed, time_index)?;
        if let Some(q) = &s.quantize {
            ms = quantize_measurements(&ms, q.n_bits, q.db_min, q.db_max)?;
        }
        if let Some(f) = &s.filter {
            ms = filter_bad_data(&ms, f.k_mad, f.neighbor_count)?;
        }
        Ok(ms)
    }
}
