//! TOML configuration files.
//!
//! A *scenario file* describes the radio environment; a *run file* points at
//! a scenario and configures sensing, estimation, the time series and the
//! applications. Relative paths inside a run file resolve against the run
//! file's directory.
//!
//! ```toml
//! # scenario
//! seed = 7
//! [area]
//! width_m = 10000.0
//! height_m = 10000.0
//! cell_size_m = 100.0
//! [band]
//! channel_centers_hz = [100e6]
//! channel_width_hz = 3e6
//! [propagation]
//! pathloss_exponent = 3.0
//! shadowing_sigma_db = 5.0
//! decorrelation_distance_m = 500.0
//! noise_floor_dbw = -130.0
//! [[transmitters]]
//! id = 1
//! x = 2500.0
//! y = 7000.0
//! power_w = 1.0
//! [random_obstacles]
//! count = 15
//! min_length_m = 400.0
//! max_length_m = 1500.0
//! penetration_loss_db = 8.0
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::Route;
use crate::error::{Error, Result};
use crate::estimate::MethodConfig;
use crate::field::{BandLayout, Geometry};
use crate::scenario::{random_obstacles, Obstacle, PropagationParams, Scenario, Transmitter};
use crate::sensing::Placement;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Free-space channel gain at 1 m for carrier `f_hz`, dB.
pub fn free_space_reference_gain_db(f_hz: f64) -> f64 {
    20.0 * (SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * f_hz)).log10()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaConfig {
    #[serde(default)]
    pub origin_x: f64,
    #[serde(default)]
    pub origin_y: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub cell_size_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub channel_centers_hz: Vec<f64>,
    pub channel_width_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmitterConfig {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub power_w: f64,
    #[serde(default)]
    pub channel: usize,
    /// Defaults to the free-space gain at 1 m for the channel center.
    #[serde(default)]
    pub reference_gain_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomObstacles {
    pub count: usize,
    pub min_length_m: f64,
    pub max_length_m: f64,
    pub penetration_loss_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub seed: u64,
    pub area: AreaConfig,
    pub band: BandConfig,
    pub propagation: PropagationParams,
    pub transmitters: Vec<TransmitterConfig>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub random_obstacles: Option<RandomObstacles>,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self> {
        parse(&read(path)?, path)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn layout(&self) -> Result<BandLayout> {
        let a = &self.area;
        let geometry = Geometry::covering(a.origin_x, a.origin_y, a.width_m, a.height_m, a.cell_size_m)?;
        Ok(BandLayout {
            geometry,
            channel_centers: self.band.channel_centers_hz.clone(),
            channel_width: self.band.channel_width_hz,
        })
    }

    /// Builds the scenario; random walls are drawn from the `obstacles`
    /// substream of `seed` (the file's seed unless overridden).
    pub fn build(&self, seed: Option<u64>) -> Result<Scenario> {
        let seed = seed.unwrap_or(self.seed);
        let layout = self.layout()?;
        let transmitters = self
            .transmitters
            .iter()
            .map(|t| {
                let center = *layout.channel_centers.get(t.channel).ok_or_else(|| {
                    Error::InvalidInput(format!("transmitter {} uses unknown channel {}", t.id, t.channel))
                })?;
                Ok(Transmitter {
                    id: t.id,
                    x: t.x,
                    y: t.y,
                    tx_power_w: t.power_w,
                    channel: t.channel,
                    reference_gain_db: t.reference_gain_db.unwrap_or_else(|| free_space_reference_gain_db(center)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut obstacles = self.obstacles.clone();
        if let Some(r) = &self.random_obstacles {
            obstacles.extend(random_obstacles(
                &layout.geometry,
                r.count,
                r.min_length_m,
                r.max_length_m,
                r.penetration_loss_db,
                seed,
            )?);
        }
        Scenario::new(layout, transmitters, obstacles, self.propagation, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementMode {
    UniformGrid,
    UniformRandom,
}

impl PlacementMode {
    pub fn placement(self) -> Placement {
        match self {
            PlacementMode::UniformGrid => Placement::UniformGrid,
            PlacementMode::UniformRandom => Placement::UniformRandom,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizeConfig {
    pub n_bits: u32,
    pub db_min: f64,
    pub db_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub k_mad: f64,
    pub neighbor_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingConfig {
    pub n_sensors: usize,
    #[serde(default = "default_placement")]
    pub placement: PlacementMode,
    #[serde(default)]
    pub noise_sigma_db: f64,
    #[serde(default)]
    pub quantize: Option<QuantizeConfig>,
    #[serde(default)]
    pub filter: Option<FilterConfig>,
}

fn default_placement() -> PlacementMode {
    PlacementMode::UniformGrid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemporalConfig {
    pub epochs: u64,
    pub window_length: usize,
    /// Name of the estimator block used for the series.
    pub method: String,
    #[serde(default = "default_tile_size")]
    pub tile_size: usize,
    #[serde(default = "default_n_bits")]
    pub n_bits: u8,
    #[serde(default = "default_change_threshold")]
    pub change_threshold_db: f64,
}

fn default_tile_size() -> usize {
    16
}

fn default_n_bits() -> u8 {
    8
}

fn default_change_threshold() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteConfig {
    pub waypoints: Vec<[f64; 2]>,
    /// Serving transmitter id per leg.
    pub serving: Vec<u32>,
    #[serde(default)]
    pub step_m: Option<f64>,
}

impl RouteConfig {
    /// Route with serving ids mapped to positions in `tx_ids`.
    pub fn route(&self, tx_ids: &[u32]) -> Result<Route> {
        let serving = self
            .serving
            .iter()
            .map(|id| tx_ids.iter().position(|t| t == id).ok_or(Error::UnknownTransmitter(*id)))
            .collect::<Result<Vec<_>>>()?;
        let r = Route::new(self.waypoints.iter().map(|p| (p[0], p[1])).collect(), serving)?;
        match self.step_m {
            Some(s) => r.densified(s),
            None => Ok(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RogueConfig {
    pub x: f64,
    pub y: f64,
    pub power_w: f64,
    #[serde(default)]
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalyConfig {
    pub k_sigma: f64,
    #[serde(default)]
    pub rogue: Option<RogueConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageRow {
    pub width_km: f64,
    pub height_km: f64,
    pub cell_m: f64,
    pub band_mhz: f64,
    pub channel_mhz: f64,
    pub duration_h: f64,
    pub step_min: f64,
    pub bits_per_px: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticsConfig {
    #[serde(default = "default_exclusion")]
    pub exclusion_radius_cells: f64,
    #[serde(default)]
    pub sinr_threshold_db: f64,
    #[serde(default)]
    pub routes: Vec<RouteConfig>,
    #[serde(default)]
    pub anomaly: Option<AnomalyConfig>,
    #[serde(default)]
    pub storage: Vec<StorageRow>,
}

fn default_exclusion() -> f64 {
    1.0
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        AnalyticsConfig {
            exclusion_radius_cells: default_exclusion(),
            sinr_threshold_db: 0.0,
            routes: Vec::new(),
            anomaly: None,
            storage: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub scenario: PathBuf,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub sensing: SensingConfig,
    #[serde(default)]
    pub estimators: Vec<MethodConfig>,
    #[serde(default)]
    pub temporal: Option<TemporalConfig>,
    #[serde(default)]
    pub analytics: AnalyticsConfig,
}

/// A run file with its scenario loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub path: PathBuf,
    pub run: RunFile,
    pub scenario_file: ScenarioFile,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut run: RunFile = parse(&read(path)?, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if run.scenario.is_relative() {
            run.scenario = base.join(&run.scenario);
        }
        if let Some(o) = &run.out_dir {
            if o.is_relative() {
                run.out_dir = Some(base.join(o));
            }
        }
        let scenario_file = ScenarioFile::load(&run.scenario)?;
        let cfg = RunConfig { path: path.to_path_buf(), run, scenario_file };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.run.estimators {
            m.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(t) = &self.run.temporal {
            if !self.run.estimators.iter().any(|m| m.name() == t.method) {
                return Err(Error::Config(format!("temporal method {} has no estimator block", t.method)));
            }
            if t.epochs == 0 || t.window_length == 0 {
                return Err(Error::Config("temporal epochs and window_length must be positive".into()));
            }
        }
        if let Some(a) = &self.run.analytics.anomaly {
            if self.run.temporal.is_none() {
                return Err(Error::Config("anomaly detection needs a temporal block for its history".into()));
            }
            if !(a.k_sigma > 0.0) {
                return Err(Error::Config("k_sigma must be positive".into()));
            }
        }
        Ok(())
    }

    /// Effective seed: command-line override, run file, then scenario file.
    pub fn seed(&self, overridden: Option<u64>) -> u64 {
        overridden.or(self.run.seed).unwrap_or(self.scenario_file.seed)
    }

    pub fn estimator(&self, name: &str) -> Option<&MethodConfig> {
        self.run.estimators.iter().find(|m| m.name() == name)
    }
}
