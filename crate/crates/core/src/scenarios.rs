//! Parameter sweeps and the named figure scenarios.
//!
//! A sweep walks a grid of at most two axes over a base device and pulse,
//! evaluating a list of metrics at every point. Points are evaluated in
//! parallel and gathered in row-major axis order, so the output does not
//! depend on scheduling.

use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::calibration::{
    find_working_point, j_vs_time, two_excitation_interaction, weak_coupling_map, CalibrationSpec,
    GateTarget, Probe,
};
use crate::config::RunConfig;
use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::evolution::{population_trace, Integrator, PopulationTrace};
use crate::exec::{linspace, par_map, Execution};
use crate::gate_metrics::{gate_report, leakage_from, truth_table_from};
use crate::open_system::decoherence_curve;
use crate::operators::FockLabel;
use crate::output::{ArtifactMeta, Table};
use crate::pulses::PulseSchedule;
use crate::units::{mhz, to_mhz};

pub const SCENARIOS: [&str; 11] = [
    "fig2a", "fig2b", "fig2d", "fig3a", "fig3b", "fig3cd", "fig4", "fig5", "fig11", "fig12",
    "fig14",
];

/// Swept quantity. Cyclic MHz and ns, as in the CSV columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    /// Anharmonicity of Q2.
    Alpha2Mhz,
    /// `Delta1 = Delta3` at the interaction point, relative to Q2.
    DetuningMhz,
    /// `Delta3` with `w1 = w3 + a3` (two-excitation resonance).
    ResonantDelta3Mhz,
    Delta1Mhz,
    Delta3Mhz,
    /// Sets `delta1 = delta3 + value`.
    OvershootMhz,
    THoldNs,
    /// Both nearest-neighbour couplings.
    CouplingMhz,
}

impl Param {
    pub fn column(&self) -> &'static str {
        match self {
            Param::Alpha2Mhz => "alpha2_mhz",
            Param::DetuningMhz => "detuning_mhz",
            Param::ResonantDelta3Mhz => "delta3_mhz",
            Param::Delta1Mhz => "delta1_mhz",
            Param::Delta3Mhz => "delta3_mhz",
            Param::OvershootMhz => "overshoot_mhz",
            Param::THoldNs => "t_hold_ns",
            Param::CouplingMhz => "coupling_mhz",
        }
    }

    fn apply(&self, v: f64, p: &mut DeviceParams, s: &mut PulseSchedule) {
        match self {
            Param::Alpha2Mhz => p.anharmonicity[1] = mhz(v),
            Param::DetuningMhz => {
                s.interaction[0] = s.idle[1] + mhz(v);
                s.interaction[2] = s.idle[1] + mhz(v);
            }
            Param::ResonantDelta3Mhz => s.interaction = two_excitation_interaction(p, mhz(v)),
            Param::Delta1Mhz => s.delta1 = mhz(v),
            Param::Delta3Mhz => s.delta3 = mhz(v),
            Param::OvershootMhz => s.delta1 = s.delta3 + mhz(v),
            Param::THoldNs => s.t_hold = v,
            Param::CouplingMhz => p.coupling = [mhz(v); 2],
        }
    }
}

/// Quantity evaluated at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Analytic `J1(0)` at the plateau frequencies, MHz.
    J1Ground,
    /// Analytic `J1(1)`, MHz.
    J1Excited,
    /// Analytic `J2(1),I` (`|111> <-> |012>`), MHz.
    J2ExcitedI,
    /// `1 - P(blocked -> blocked)`.
    SwapError,
    /// `P(swap_from -> swap_to)`.
    Transfer,
    /// Phase-optimized intrinsic fidelity.
    Fidelity,
    WorstLeakage,
}

impl Metric {
    pub fn column(&self) -> &'static str {
        match self {
            Metric::J1Ground => "j1_ground_mhz",
            Metric::J1Excited => "j1_excited_mhz",
            Metric::J2ExcitedI => "j2_excited_i_mhz",
            Metric::SwapError => "swap_error",
            Metric::Transfer => "transfer",
            Metric::Fidelity => "fidelity",
            Metric::WorstLeakage => "worst_leakage",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(name.into()))
            .map_err(|_| Error::Config(format!("unknown metric {name:?}")))
    }

    fn needs_probe(&self) -> bool {
        matches!(self, Metric::SwapError | Metric::Transfer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: Param,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(param: Param, lo: f64, hi: f64, points: usize) -> Self {
        Self {
            param,
            lo,
            hi,
            points,
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub scenario: String,
    pub axes: Vec<Axis>,
    pub metrics: Vec<Metric>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::Config(format!(
                "a sweep takes 1 or 2 axes, got {}",
                self.axes.len()
            )));
        }
        for a in &self.axes {
            if !(a.lo.is_finite() && a.hi.is_finite()) {
                return Err(Error::Config(format!(
                    "axis {} has a non-finite range",
                    a.param.column()
                )));
            }
            if a.points == 0 {
                return Err(Error::Config(format!(
                    "axis {} needs at least one point",
                    a.param.column()
                )));
            }
        }
        if self.metrics.is_empty() {
            return Err(Error::Config("sweep has no metrics".into()));
        }
        Ok(())
    }
}

/// Everything a sweep point starts from.
#[derive(Debug, Clone)]
pub struct SweepBase {
    pub device: DeviceParams,
    pub schedule: PulseSchedule,
    pub target: GateTarget,
    pub integrator: Integrator,
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub scenario: String,
    pub grids: Vec<(String, Vec<f64>)>,
    pub metrics: Vec<String>,
    /// Row-major over the axes; one entry per metric.
    pub values: Vec<Vec<Option<f64>>>,
    pub reasons: Vec<Option<String>>,
}

impl SweepResult {
    pub fn shape(&self) -> Vec<usize> {
        self.grids.iter().map(|(_, g)| g.len()).collect()
    }

    pub fn table(&self) -> Table {
        let cols: Vec<&str> = self
            .grids
            .iter()
            .map(|(n, _)| n.as_str())
            .chain(self.metrics.iter().map(String::as_str))
            .collect();
        let mut t = Table::new(&cols);
        for (k, vals) in self.values.iter().enumerate() {
            let mut row = Vec::with_capacity(cols.len());
            let mut rem = k;
            let mut coords = vec![0.0; self.grids.len()];
            for (a, (_, g)) in self.grids.iter().enumerate().rev() {
                coords[a] = g[rem % g.len()];
                rem /= g.len();
            }
            row.extend(coords.into_iter().map(Some));
            row.extend(vals.iter().copied());
            t.rows.push(row);
            if let Some(r) = &self.reasons[k] {
                t.missing.push((k, r.clone()));
            }
        }
        t
    }

    pub fn metric(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let m = self.metrics.iter().position(|c| c == name)?;
        Some(self.values.iter().map(|v| v[m]).collect())
    }
}

fn eval_metric(
    m: Metric,
    p: &DeviceParams,
    s: &PulseSchedule,
    base: &SweepBase,
    probe: Option<&Probe>,
) -> Result<f64> {
    let [g1, g3] = p.coupling;
    let [d1, d3] = DeviceParams::detunings(&s.targets());
    let a = p.anharmonicity;
    let t = &base.target;
    let probe = || probe.ok_or_else(|| Error::NumericalFailure("no probe".into()));
    match m {
        Metric::J1Ground => analytic::j1_ground(g1, g3, d1, d3).map(to_mhz),
        Metric::J1Excited => analytic::j1_excited(g1, g3, d1, d3, a[1]).map(to_mhz),
        Metric::J2ExcitedI => {
            analytic::j2_excited(g1, g3, d1, d3, a[0], a[2], a[1]).map(|(i, _)| to_mhz(i))
        }
        Metric::SwapError => probe()?
            .transition(s, &base.integrator, &t.blocked, &t.blocked)
            .map(|r| 1.0 - r),
        Metric::Transfer => probe()?.transition(s, &base.integrator, &t.swap_to, &t.swap_from),
        Metric::Fidelity => gate_report(p, s, &base.integrator).map(|r| r.fidelity),
        Metric::WorstLeakage => gate_report(p, s, &base.integrator).map(|r| r.worst_leakage),
    }
}

fn eval_point(
    spec: &SweepSpec,
    base: &SweepBase,
    coords: &[f64],
) -> (Vec<Option<f64>>, Option<String>) {
    let mut p = base.device.clone();
    let mut s = base.schedule.clone();
    for (a, &v) in spec.axes.iter().zip(coords) {
        a.param.apply(v, &mut p, &mut s);
    }
    let max_exc = [t_exc(&base.target.blocked), t_exc(&base.target.swap_from)]
        .into_iter()
        .max()
        .unwrap_or(1);
    let probe = if spec.metrics.iter().any(Metric::needs_probe) {
        p.validate()
            .and_then(|_| Probe::new(&p, &p.idle, max_exc))
            .map(Some)
    } else {
        Ok(None)
    };
    let mut reasons = Vec::new();
    let vals = spec
        .metrics
        .iter()
        .map(|&m| {
            let r = match &probe {
                Ok(pr) => eval_metric(m, &p, &s, base, pr.as_ref()),
                Err(e) => Err(e.clone()),
            };
            match r {
                Ok(v) => Some(v),
                Err(e) => {
                    reasons.push(format!("{}: {e}", m.column()));
                    None
                }
            }
        })
        .collect();
    let reason = (!reasons.is_empty()).then(|| reasons.join("; "));
    (vals, reason)
}

fn t_exc(l: &FockLabel) -> usize {
    l.excitations()
}

pub fn run_sweep(base: &SweepBase, spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let grids: Vec<Vec<f64>> = spec.axes.iter().map(Axis::grid).collect();
    let points: Vec<Vec<f64>> = match grids.as_slice() {
        [a] => a.iter().map(|&x| vec![x]).collect(),
        [a, b] => a
            .iter()
            .flat_map(|&x| b.iter().map(move |&y| vec![x, y]))
            .collect(),
        _ => unreachable!("validated"),
    };
    let evaluated = par_map(base.execution, &points, |c| eval_point(spec, base, c));
    let (values, reasons) = evaluated.into_iter().unzip();
    Ok(SweepResult {
        scenario: spec.scenario.clone(),
        grids: spec
            .axes
            .iter()
            .zip(grids)
            .map(|(a, g)| (a.param.column().to_string(), g))
            .collect(),
        metrics: spec
            .metrics
            .iter()
            .map(|m| m.column().to_string())
            .collect(),
        values,
        reasons,
    })
}

/// A scenario's table and the metadata stamped on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub meta: ArtifactMeta,
    pub table: Table,
}

impl ScenarioOutput {
    pub fn to_csv(&self) -> Result<String> {
        crate::output::to_csv(&self.meta, &self.table)
    }
}

/// Resolution knobs; the defaults are the published figure grids.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub points: usize,
    pub points_2d: usize,
    pub trace_samples: usize,
    pub t1_us: Vec<f64>,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            points: 141,
            points_2d: 41,
            trace_samples: 401,
            t1_us: vec![10.0, 15.0, 20.0, 30.0, 50.0, 75.0, 105.0, 150.0],
        }
    }
}

/// Detuning of the Fig. 2 chain, relative to Q2.
pub const FIG2_DETUNING_MHZ: f64 = -500.0;
/// Two-excitation resonance detuning, `-7 g` at the reference coupling.
pub const FIG11_DELTA3_MHZ: f64 = -315.0;
pub const FIG12_ALPHA2_MHZ: f64 = 665.0;
pub const FIG12_HOLD_NS: f64 = 60.0;
pub const WEAK_COUPLING_MHZ: f64 = 30.0;

fn base(cfg: &RunConfig, exec: Execution) -> Result<SweepBase> {
    let dt = cfg.calibration.dt_ns.unwrap_or(cfg.integrator.dt_ns);
    Ok(SweepBase {
        device: cfg.device_params()?,
        schedule: cfg.schedule()?,
        target: GateTarget::ciswap(),
        integrator: Integrator::unverified(dt),
        execution: exec,
    })
}

fn sweep_output(cfg: &RunConfig, b: &SweepBase, spec: SweepSpec) -> Result<ScenarioOutput> {
    let r = run_sweep(b, &spec)?;
    Ok(ScenarioOutput {
        meta: ArtifactMeta::new(&spec.scenario, &cfg.config_hash(), b.integrator.dt),
        table: r.table(),
    })
}

/// Trace columns restricted to the sector of the initial state.
fn sector_columns(tr: &PopulationTrace) -> Vec<usize> {
    let n = tr.initial.excitations();
    (0..tr.labels.len())
        .filter(|&i| tr.labels[i].excitations() == n)
        .collect()
}

fn traces_table(traces: &[(&str, PopulationTrace)]) -> Result<Table> {
    let keep: Vec<Vec<usize>> = traces.iter().map(|(_, tr)| sector_columns(tr)).collect();
    let mut cols = vec!["t_ns".to_string()];
    for ((prefix, tr), idx) in traces.iter().zip(&keep) {
        cols.extend(idx.iter().map(|&i| format!("{prefix}p{}", tr.labels[i])));
    }
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(&refs);
    let times = &traces[0].1.times;
    for (k, &time) in times.iter().enumerate() {
        let mut row = vec![time];
        for ((_, tr), idx) in traces.iter().zip(&keep) {
            row.extend(idx.iter().map(|&i| tr.populations[k][i]));
        }
        t.push_values(&row)?;
    }
    Ok(t)
}

fn sample_every(integ: &Integrator, t_gate: f64, samples: usize) -> usize {
    (integ.steps(t_gate) / samples.max(1)).max(1)
}

/// Working point of the two-excitation switch (Figs. 11 and 12 device).
pub fn second_null_working_point(
    cfg: &RunConfig,
    exec: Execution,
) -> Result<(
    DeviceParams,
    CalibrationSpec,
    crate::calibration::WorkingPoint,
)> {
    let mut p = cfg.device_params()?;
    p.anharmonicity[1] = mhz(FIG12_ALPHA2_MHZ);
    let inter = two_excitation_interaction(&p, mhz(FIG11_DELTA3_MHZ));
    let mut spec = cfg.calibration_spec(GateTarget::two_excitation(), exec)?;
    spec.interaction = inter;
    spec.stage1_hold = Some(FIG12_HOLD_NS);
    spec.hold_range = None;
    spec.dt = spec.dt.max(0.02);
    let wp = find_working_point(&p, &spec)?;
    Ok((p, spec, wp))
}

/// Weak-coupling calibration settings: a wide seed window, since the
/// switch-off point moves far from the reference interaction point.
pub fn weak_coupling_spec(cfg: &RunConfig, exec: Execution) -> Result<CalibrationSpec> {
    let mut spec = cfg.calibration_spec(GateTarget::ciswap(), exec)?;
    spec.seed_window = mhz(250.0);
    spec.offset_half_span = mhz(10.0);
    spec.offset_points = 21;
    spec.overshoot_half_span = mhz(6.0);
    spec.overshoot_points = 25;
    spec.hold_points = 41;
    spec.stage1_hold = None;
    spec.hold_range = None;
    spec.dt = spec.dt.max(0.02);
    Ok(spec)
}

pub fn run_scenario(name: &str, cfg: &RunConfig, exec: Execution) -> Result<ScenarioOutput> {
    run_scenario_with(name, cfg, exec, &Resolution::default())
}

pub fn run_scenario_with(
    name: &str,
    cfg: &RunConfig,
    exec: Execution,
    res: &Resolution,
) -> Result<ScenarioOutput> {
    let hash = cfg.config_hash();
    let mut b = base(cfg, exec)?;
    let spec = |axes, metrics| SweepSpec {
        scenario: name.to_string(),
        axes,
        metrics,
    };
    match name {
        "fig2a" | "fig2b" => {
            b.schedule = b.schedule.with_offsets(0.0, 0.0);
            Param::DetuningMhz.apply(FIG2_DETUNING_MHZ, &mut b.device, &mut b.schedule);
            let alpha = Axis::new(Param::Alpha2Mhz, 0.0, 700.0, res.points);
            if name == "fig2a" {
                sweep_output(
                    cfg,
                    &b,
                    spec(vec![alpha], vec![Metric::J1Ground, Metric::J1Excited]),
                )
            } else {
                let alpha = Axis::new(Param::Alpha2Mhz, 0.0, 700.0, res.points_2d);
                let det = Axis::new(Param::DetuningMhz, -700.0, -100.0, res.points_2d);
                sweep_output(cfg, &b, spec(vec![alpha, det], vec![Metric::J1Excited]))
            }
        }
        "fig2d" => {
            let tr = j_vs_time(&b.device, &b.schedule, res.trace_samples)?;
            let mut t = Table::new(&["t_ns", "j1_ground_mhz", "j1_excited_mhz"]);
            for k in 0..tr.times.len() {
                t.push(vec![
                    Some(tr.times[k]),
                    tr.j1_ground[k].map(to_mhz),
                    tr.j1_excited[k].map(to_mhz),
                ])?;
                if tr.j1_ground[k].is_none() || tr.j1_excited[k].is_none() {
                    t.missing.push((k, "singular detuning".into()));
                }
            }
            Ok(ScenarioOutput {
                meta: ArtifactMeta::new(name, &hash, 0.0),
                table: t,
            })
        }
        "fig3a" => {
            let hold = cfg
                .calibration
                .stage1_hold_ns
                .unwrap_or(cfg.pulse.t_hold_ns);
            b.schedule = b.schedule.with_hold(hold);
            let c = cfg.pulse.delta3_mhz;
            let w = cfg.calibration.offset_half_span_mhz;
            let d1 = Axis::new(Param::Delta1Mhz, c - w, c + w, res.points_2d);
            let d3 = Axis::new(Param::Delta3Mhz, c - w, c + w, res.points_2d);
            sweep_output(cfg, &b, spec(vec![d1, d3], vec![Metric::SwapError]))
        }
        "fig3b" => {
            let w = cfg.calibration.overshoot_half_span_mhz;
            let th = cfg.pulse.t_hold_ns;
            let os = Axis::new(Param::OvershootMhz, -w, w, res.points_2d);
            let hold = Axis::new(Param::THoldNs, 0.8 * th, 1.2 * th, 2 * res.points_2d - 1);
            sweep_output(cfg, &b, spec(vec![os, hold], vec![Metric::Transfer]))
        }
        "fig3cd" => {
            let integ = cfg.integrator()?;
            let every = sample_every(&integ, b.schedule.t_gate(), res.trace_samples);
            let integ = Integrator::unverified(integ.dt);
            let c = population_trace(
                &b.device,
                &b.schedule,
                FockLabel::new(1, 0, 0),
                &integ,
                every,
            )?;
            let d = population_trace(
                &b.device,
                &b.schedule,
                FockLabel::new(1, 1, 0),
                &integ,
                every,
            )?;
            Ok(ScenarioOutput {
                meta: ArtifactMeta::new(name, &hash, integ.dt),
                table: traces_table(&[("c_", c), ("d_", d)])?,
            })
        }
        "fig4" => {
            let integ = cfg.integrator()?;
            let r = gate_report(&b.device, &b.schedule, &integ)?;
            let tt = truth_table_from(&r.projected);
            let leak = leakage_from(&r.projected);
            let mut cols = vec!["input".to_string()];
            cols.extend((0..8).map(|o| format!("p{o:03b}")));
            cols.push("leakage".into());
            let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
            let mut t = Table::new(&refs);
            for i in 0..8 {
                let mut row = vec![i as f64];
                row.extend((0..8).map(|o| tt[o][i]));
                row.push(leak[i]);
                t.push_values(&row)?;
            }
            Ok(ScenarioOutput {
                meta: ArtifactMeta::new(name, &hash, integ.dt)
                    .with_verification(r.convergence, crate::evolution::VERIFY_TOL),
                table: t,
            })
        }
        "fig5" => {
            let integ = cfg.open_integrator()?;
            let pts = decoherence_curve(&b.device, &b.schedule, &res.t1_us, &integ, exec)?;
            let mut t = Table::new(&["t1_us", "eps_full", "eps_intrinsic", "eps_t1"]);
            for d in pts {
                t.push_values(&[d.t1_us, d.eps_full, d.eps_intrinsic, d.eps_t1])?;
            }
            Ok(ScenarioOutput {
                meta: ArtifactMeta::new(name, &hash, integ.dt),
                table: t,
            })
        }
        "fig11" => {
            let alpha = Axis::new(Param::Alpha2Mhz, 400.0, 900.0, res.points_2d);
            let d3 = Axis::new(Param::ResonantDelta3Mhz, -450.0, -180.0, res.points_2d);
            sweep_output(cfg, &b, spec(vec![alpha, d3], vec![Metric::J2ExcitedI]))
        }
        "fig12" => {
            let (p, cal, wp) = second_null_working_point(cfg, exec)?;
            let s = wp.schedule(p.idle)?;
            let integ = Integrator::unverified(cal.dt);
            let every = sample_every(&integ, s.t_gate(), res.trace_samples);
            let on = population_trace(&p, &s, cal.target.swap_from, &integ, every)?;
            let off = population_trace(&p, &s, cal.target.blocked, &integ, every)?;
            Ok(ScenarioOutput {
                meta: ArtifactMeta::new(name, &hash, integ.dt),
                table: traces_table(&[("on_", on), ("off_", off)])?,
            })
        }
        "fig14" => {
            let p = b.device.with_coupling([mhz(WEAK_COUPLING_MHZ); 2]);
            let spec = weak_coupling_spec(cfg, exec)?;
            let alpha: Vec<f64> = linspace(150.0, 450.0, res.points_2d.min(16))
                .into_iter()
                .map(mhz)
                .collect();
            let holds = linspace(40.0, 120.0, res.points_2d.min(9));
            let m = weak_coupling_map(&p, &spec, &alpha, &holds);
            let mut t = Table::new(&["alpha2_mhz", "t_hold_ns", "fidelity"]);
            for (i, &a2) in alpha.iter().enumerate() {
                for (j, &th) in holds.iter().enumerate() {
                    let k = i * holds.len() + j;
                    t.push(vec![Some(to_mhz(a2)), Some(th), m.fidelity[k]])?;
                    if let Some(r) = &m.reasons[k] {
                        t.missing.push((k, r.clone()));
                    }
                }
            }
            Ok(ScenarioOutput {
                meta: ArtifactMeta::new(name, &hash, spec.dt),
                table: t,
            })
        }
        other => Err(Error::Config(format!(
            "unknown scenario {other:?}; known: {}",
            SCENARIOS.join(", ")
        ))),
    }
}
