//! Cyclic <-> angular conversions.
//!
//! Configs and reports quote `omega / 2pi` in GHz or MHz. Internally every
//! frequency is angular, in rad/ns; times are in ns.

use std::f64::consts::TAU;

pub fn ghz(f: f64) -> f64 {
    TAU * f
}

pub fn mhz(f: f64) -> f64 {
    TAU * f * 1e-3
}

pub fn to_ghz(w: f64) -> f64 {
    w / TAU
}

pub fn to_mhz(w: f64) -> f64 {
    w / TAU * 1e3
}

pub fn us(t: f64) -> f64 {
    t * 1e3
}

pub fn to_us(t: f64) -> f64 {
    t * 1e-3
}
