//! Simulation, feature extraction and lead-time-maximizing fall detection
//! for a standing planar four-link biped.

pub mod config;
pub mod dataset;
pub mod detectors;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod features;
pub mod params;
pub mod scenario;
pub mod util;

pub use error::{Error, Result};
pub use params::RobotParams;
