//! Spectrum cartography toolkit.
//!
//! The crate synthesizes ground-truth radio maps from a declarative
//! [`scenario::Scenario`], simulates distributed sensor measurements
//! ([`sensing`]), reconstructs the map with model-based and model-free
//! estimators ([`estimate`]), maintains maps over time ([`temporal`]) and
//! runs map-driven analytics such as SINR prediction, dead-zone detection
//! and anomaly localisation ([`analytics`]).
//!
//! All estimation happens in the dB domain. Linear watts only appear at the
//! boundaries: ground truth generation, superposition and integration.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod config;
pub mod error;
pub mod estimate;
pub mod field;
pub mod rng;
pub mod scenario;
pub mod sensing;
pub mod temporal;

pub use error::{Error, ErrorKind, Result};
pub use field::{BandGrid, Geometry, Grid2D, Unit};
