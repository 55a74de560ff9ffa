//! Calibration measures for sequential binary prediction.
//!
//! The crate computes ECE, smooth calibration error, exact and lower
//! calibration distance, builds calibrated certificates through transport
//! plans, and simulates forecaster/adversary games and the controlled random
//! walk. Monte Carlo work runs through [`exec`], which uses rayon when the
//! `parallel` feature is on.

pub mod error;
pub mod exec;
pub mod forecasting;
pub mod harness;
pub mod lp;
pub mod metrics;
pub mod simulation;
pub mod textio;
pub mod transport;
pub mod types;
pub mod walkgame;

pub use error::{CalibError, LpError, Result};
pub use exec::Execution;
pub use types::*;
