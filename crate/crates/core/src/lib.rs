pub mod analytic;
pub mod calibration;
pub mod circuits;
pub mod config;
pub mod device;
pub mod error;
pub mod evolution;
pub mod exec;
pub mod gate_metrics;
pub mod open_system;
pub mod operators;
pub mod optimize;
pub mod output;
pub mod pulses;
pub mod scenarios;
pub mod units;

pub use error::{Error, Result};
