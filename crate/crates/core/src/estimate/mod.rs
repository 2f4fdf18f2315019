//! Map reconstruction from sparse measurements.
//!
//! Model-free interpolators (IDW, modified IDW, RBF, ordinary Kriging) and
//! the model-based path-loss pipeline share one fit/predict contract through
//! [`FittedEstimator`]; [`estimate_map`] sweeps it over a grid.

pub mod idw;
pub mod kriging;
pub(crate) mod linalg;
pub mod map;
pub mod multi;
pub mod pathloss;
pub mod psd;
pub mod rbf;
pub mod variogram;

pub use idw::{estimate_idw, estimate_midw};
pub use kriging::{estimate_kriging, KrigingModel, KrigingPrediction};
pub use map::{estimate_map, estimate_map_with_fits, estimate_model_based_multi, FittedEstimator, MethodConfig};
pub use multi::{fit_model_based, model_based_map};
pub use pathloss::{fit_pathloss_single, Bounds, PathLossFit};
pub use psd::{psd_basis_project, BasisProjection, PsdSamples, RaisedCosine};
pub use rbf::{estimate_rbf, RbfKind, RbfModel};
pub use variogram::{empirical_variogram, fit_variogram, Variogram, VariogramBin, VariogramModel};
