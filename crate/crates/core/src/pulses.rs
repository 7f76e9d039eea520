//! Rounded-trapezoid flux pulses for the outer qubits.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};

pub const DEFAULT_SIGMA_NS: f64 = 1.0;

/// Per-qubit frequency trajectories for one gate. Q2 stays at its idle
/// frequency; Q1 and Q3 ramp from `idle` to `interaction + delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub idle: [f64; 3],
    /// Ideal interaction point; the Q2 entry is ignored.
    pub interaction: [f64; 3],
    pub delta1: f64,
    pub delta3: f64,
    /// Gaussian width of the ramps (ns).
    pub sigma: f64,
    /// Interval between ramp midpoints (ns).
    pub t_hold: f64,
}

impl PulseSchedule {
    pub fn new(
        idle: [f64; 3],
        interaction: [f64; 3],
        delta1: f64,
        delta3: f64,
        t_hold: f64,
        sigma: f64,
    ) -> Result<Self> {
        let s = Self {
            idle,
            interaction: [interaction[0], idle[1], interaction[2]],
            delta1,
            delta3,
            sigma,
            t_hold,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Validation(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.t_hold >= 0.0 && self.t_hold.is_finite()) {
            return Err(Error::Validation(format!(
                "t_hold must be >= 0, got {}",
                self.t_hold
            )));
        }
        let all = self
            .idle
            .iter()
            .chain(&self.interaction)
            .chain([&self.delta1, &self.delta3]);
        if all.into_iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("non-finite pulse frequency".into()));
        }
        Ok(())
    }

    pub fn t_ramp(&self) -> f64 {
        4.0 * std::f64::consts::SQRT_2 * self.sigma
    }

    pub fn t_gate(&self) -> f64 {
        self.t_hold + self.t_ramp()
    }

    pub fn overshoot(&self) -> f64 {
        self.delta1 - self.delta3
    }

    /// Frequency each qubit holds at during the plateau.
    pub fn targets(&self) -> [f64; 3] {
        [
            self.interaction[0] + self.delta1,
            self.idle[1],
            self.interaction[2] + self.delta3,
        ]
    }

    pub fn with_hold(&self, t_hold: f64) -> Self {
        Self {
            t_hold,
            ..self.clone()
        }
    }

    pub fn with_offsets(&self, delta1: f64, delta3: f64) -> Self {
        Self {
            delta1,
            delta3,
            ..self.clone()
        }
    }

    /// Envelope in [0, 1]: `(erf((t - tr/2)/(sqrt2 s)) - erf((t - tg + tr/2)/(sqrt2 s)))/2`.
    pub fn envelope(&self, t: f64) -> f64 {
        let half = self.t_ramp() / 2.0;
        let w = std::f64::consts::SQRT_2 * self.sigma;
        0.5 * (erf((t - half) / w) - erf((t - self.t_gate() + half) / w))
    }

    /// All three frequencies at time `t`; no range check.
    pub fn frequencies_at(&self, t: f64) -> [f64; 3] {
        let e = self.envelope(t);
        let tg = self.targets();
        [
            self.idle[0] + (tg[0] - self.idle[0]) * e,
            self.idle[1],
            self.idle[2] + (tg[2] - self.idle[2]) * e,
        ]
    }

    /// Frequency of `qubit` (0-based) at `t` in `[0, t_g]`.
    pub fn trajectory(&self, qubit: usize, t: f64) -> Result<f64> {
        if qubit > 2 {
            return Err(Error::Range(format!("qubit index {qubit} out of 0..3")));
        }
        let tg = self.t_gate();
        if !(t >= -1e-12 && t <= tg + 1e-12) {
            return Err(Error::Range(format!("t = {t} ns outside [0, {tg}]")));
        }
        Ok(self.frequencies_at(t)[qubit])
    }

    /// Upper bound on `|w(0) - w_i|` relative to the pulse amplitude.
    pub fn endpoint_residual_bound() -> f64 {
        statrs::function::erf::erfc(2.0)
    }
}

/// Schedule for a calibrated working point: Q1 targets `w_I + delta1`,
/// Q3 targets `w_I + delta3`.
pub fn schedule_from_calibration(
    idle: [f64; 3],
    interaction: [f64; 3],
    delta1: f64,
    delta3: f64,
    t_hold: f64,
    sigma: f64,
) -> Result<PulseSchedule> {
    PulseSchedule::new(idle, interaction, delta1, delta3, t_hold, sigma)
}
