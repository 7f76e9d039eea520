//! Run configuration in cyclic units.
//!
//! Key suffixes carry the unit: `_ghz`, `_mhz` (cyclic frequency),
//! `_ns`, `_us`. Everything is converted to rad/ns and ns on the way in.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{CalibrationSpec, GateTarget};
use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::evolution::{Integrator, DEFAULT_DT_NS};
use crate::exec::Execution;
use crate::open_system::{NoiseParams, OPEN_DT_NS};
use crate::pulses::PulseSchedule;
use crate::units::{ghz, mhz, us};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

const REQUIRED: [(&str, &str); 7] = [
    ("device", "idle_ghz"),
    ("device", "anharmonicity_mhz"),
    ("device", "coupling_mhz"),
    ("pulse", "interaction_ghz"),
    ("pulse", "delta1_mhz"),
    ("pulse", "delta3_mhz"),
    ("pulse", "t_hold_ns"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub idle_ghz: [f64; 3],
    pub anharmonicity_mhz: [f64; 3],
    /// `[g1, g3]`.
    pub coupling_mhz: [f64; 2],
    #[serde(default = "default_levels")]
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub interaction_ghz: [f64; 3],
    pub delta1_mhz: f64,
    pub delta3_mhz: f64,
    pub t_hold_ns: f64,
    #[serde(default = "default_sigma")]
    pub sigma_ns: f64,
}

/// One value for all qubits or one per qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerQubit {
    Uniform(f64),
    Each([f64; 3]),
}

impl PerQubit {
    fn values(&self) -> [f64; 3] {
        match *self {
            PerQubit::Uniform(v) => [v; 3],
            PerQubit::Each(v) => v,
        }
    }
}

/// Absent `tphi_us` means no pure dephasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub t1_us: Option<PerQubit>,
    pub tphi_us: Option<PerQubit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default = "default_dt")]
    pub dt_ns: f64,
    #[serde(default = "default_true")]
    pub verify: bool,
    #[serde(default = "default_open_dt")]
    pub open_dt_ns: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt_ns: DEFAULT_DT_NS,
            verify: true,
            open_dt_ns: OPEN_DT_NS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    #[serde(default = "default_stage1_hold")]
    pub stage1_hold_ns: Option<f64>,
    #[serde(default = "default_offset_span")]
    pub offset_half_span_mhz: f64,
    #[serde(default = "default_grid")]
    pub offset_points: usize,
    #[serde(default = "default_overshoot_span")]
    pub overshoot_half_span_mhz: f64,
    #[serde(default = "default_grid")]
    pub overshoot_points: usize,
    #[serde(default)]
    pub hold_range_ns: Option<[f64; 2]>,
    #[serde(default = "default_hold_points")]
    pub hold_points: usize,
    #[serde(default = "default_seed_window")]
    pub seed_window_mhz: f64,
    /// Step for the calibration grids; the integrator step when absent.
    #[serde(default)]
    pub dt_ns: Option<f64>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub device: DeviceConfig,
    pub pulse: PulseConfig,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn default_levels() -> usize {
    4
}
fn default_sigma() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    DEFAULT_DT_NS
}
fn default_open_dt() -> f64 {
    OPEN_DT_NS
}
fn default_true() -> bool {
    true
}
fn default_schema() -> u32 {
    CONFIG_SCHEMA_VERSION
}
fn default_stage1_hold() -> Option<f64> {
    Some(45.0)
}
fn default_offset_span() -> f64 {
    20.0
}
fn default_overshoot_span() -> f64 {
    4.0
}
fn default_grid() -> usize {
    41
}
fn default_hold_points() -> usize {
    81
}
fn default_seed_window() -> f64 {
    60.0
}

/// The shipped reference configuration, calibrated at the reference device.
pub const TABLE1_JSON: &str = include_str!("../configs/table1.json");

/// Parses and validates a config. Unknown keys are rejected; missing
/// required keys are reported together.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
    let missing: Vec<String> = REQUIRED
        .iter()
        .filter(|(section, key)| obj.get(*section).and_then(|s| s.get(*key)).is_none())
        .map(|(section, key)| format!("{section}.{key}"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "missing required keys: {}",
            missing.join(", ")
        )));
    }
    let cfg: RunConfig = serde_json::from_value(value)?;
    if cfg.schema_version != CONFIG_SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema_version {}, expected {CONFIG_SCHEMA_VERSION}",
            cfg.schema_version
        )));
    }
    cfg.device_params()
        .map_err(|e| Error::Config(e.to_string()))?;
    cfg.schedule().map_err(|e| Error::Config(e.to_string()))?;
    cfg.noise_params()
        .map_err(|e| Error::Config(e.to_string()))?;
    cfg.integrator().map_err(|e| Error::Config(e.to_string()))?;
    for w in cfg.warnings() {
        log::warn!("{w}");
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn table1() -> Self {
        parse_config(TABLE1_JSON).expect("shipped config parses")
    }

    /// Unit sanity checks that do not stop a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (k, f) in self.device.idle_ghz.iter().enumerate() {
            if !(1.0..=20.0).contains(f) {
                out.push(format!(
                    "device.idle_ghz[{k}] = {f} is outside 1-20 GHz; check units"
                ));
            }
        }
        for (k, f) in self.pulse.interaction_ghz.iter().enumerate() {
            if !(1.0..=20.0).contains(f) {
                out.push(format!(
                    "pulse.interaction_ghz[{k}] = {f} is outside 1-20 GHz; check units"
                ));
            }
        }
        out
    }

    pub fn device_params(&self) -> Result<DeviceParams> {
        let d = &self.device;
        DeviceParams::new(
            d.idle_ghz.map(ghz),
            d.anharmonicity_mhz.map(mhz),
            d.coupling_mhz.map(mhz),
            d.levels,
        )
    }

    pub fn schedule(&self) -> Result<PulseSchedule> {
        let p = &self.pulse;
        PulseSchedule::new(
            self.device.idle_ghz.map(ghz),
            p.interaction_ghz.map(ghz),
            mhz(p.delta1_mhz),
            mhz(p.delta3_mhz),
            p.t_hold_ns,
            p.sigma_ns,
        )
    }

    /// Closed system when `noise` is absent.
    pub fn noise_params(&self) -> Result<NoiseParams> {
        let Some(n) = &self.noise else {
            return Ok(NoiseParams::closed());
        };
        let conv =
            |v: &Option<PerQubit>| v.map(|x| x.values().map(us)).unwrap_or([f64::INFINITY; 3]);
        let noise = NoiseParams {
            t1: conv(&n.t1_us),
            tphi: conv(&n.tphi_us),
        };
        noise.validate()?;
        Ok(noise)
    }

    pub fn integrator(&self) -> Result<Integrator> {
        Integrator::new(self.integrator.dt_ns, self.integrator.verify)
    }

    pub fn open_integrator(&self) -> Result<Integrator> {
        Integrator::new(self.integrator.open_dt_ns, self.integrator.verify)
    }

    pub fn calibration_spec(
        &self,
        target: GateTarget,
        execution: Execution,
    ) -> Result<CalibrationSpec> {
        let c = &self.calibration;
        let mut spec = CalibrationSpec::new(target, self.pulse.interaction_ghz.map(ghz));
        spec.sigma = self.pulse.sigma_ns;
        spec.stage1_hold = c.stage1_hold_ns;
        spec.offset_half_span = mhz(c.offset_half_span_mhz);
        spec.offset_points = c.offset_points;
        spec.overshoot_half_span = mhz(c.overshoot_half_span_mhz);
        spec.overshoot_points = c.overshoot_points;
        spec.hold_range = c.hold_range_ns.map(|[a, b]| (a, b));
        spec.hold_points = c.hold_points;
        spec.seed_window = mhz(c.seed_window_mhz);
        spec.dt = c.dt_ns.unwrap_or(self.integrator.dt_ns);
        spec.execution = execution;
        Ok(spec)
    }

    /// Hex SHA-256 of the canonical serialization (defaults filled in).
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))[..16].to_string()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn shipped_config_is_table1() {
        let c = RunConfig::table1();
        assert_eq!(c.device_params().unwrap(), DeviceParams::table1());
        assert!(c.noise_params().unwrap().is_closed());
        assert_eq!(c.integrator.dt_ns, 0.01);
        assert_eq!(c.pulse.sigma_ns, 1.0);
        assert!(c.warnings().is_empty());
        let s = c.schedule().unwrap();
        assert_abs_diff_eq!(s.t_hold, 43.1, epsilon = 0.1);
    }

    #[test]
    fn empty_object_lists_required_keys() {
        let Err(Error::Config(msg)) = parse_config("{}") else {
            panic!("expected a config error")
        };
        for (s, k) in REQUIRED {
            assert!(msg.contains(&format!("{s}.{k}")), "{msg}");
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(TABLE1_JSON).unwrap();
        v["device"]["idle_mhz"] = serde_json::json!([1, 2, 3]);
        assert!(matches!(
            parse_config(&v.to_string()),
            Err(Error::Config(_))
        ));
        let mut v: serde_json::Value = serde_json::from_str(TABLE1_JSON).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(parse_config(&v.to_string()).is_err());
    }

    #[test]
    fn sign_flipped_configuration_parses() {
        // -B-A-B: transmon-like middle, CSFQ-like outer qubits.
        let mut v: serde_json::Value = serde_json::from_str(TABLE1_JSON).unwrap();
        v["device"]["anharmonicity_mhz"] = serde_json::json!([350.0, -350.0, 350.0]);
        let c = parse_config(&v.to_string()).unwrap();
        assert!(c.device_params().unwrap().anharmonicity[1] < 0.0);
    }

    #[test]
    fn unit_warning() {
        let mut v: serde_json::Value = serde_json::from_str(TABLE1_JSON).unwrap();
        v["device"]["idle_ghz"] = serde_json::json!([5150.0, 6.35, 5.3]);
        let c = parse_config(&v.to_string()).unwrap();
        assert_eq!(c.warnings().len(), 1);
    }

    #[test]
    fn noise_section() {
        let mut v: serde_json::Value = serde_json::from_str(TABLE1_JSON).unwrap();
        v["noise"] = serde_json::json!({"t1_us": 15.0});
        let n = parse_config(&v.to_string())
            .unwrap()
            .noise_params()
            .unwrap();
        assert_eq!(n.t1, [15_000.0; 3]);
        assert!(n.tphi.iter().all(|t| t.is_infinite()));
        v["noise"] = serde_json::json!({"t1_us": [10.0, 20.0, 30.0], "tphi_us": 5.0});
        let n = parse_config(&v.to_string())
            .unwrap()
            .noise_params()
            .unwrap();
        assert_eq!(n.t1[2], 30_000.0);
        assert_eq!(n.tphi, [5_000.0; 3]);
        v["noise"] = serde_json::json!({"t1_us": -1.0});
        assert!(parse_config(&v.to_string()).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::table1();
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        b.integrator.dt_ns = 0.005;
        assert_ne!(a.config_hash(), b.config_hash());
        let back = parse_config(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }
}
