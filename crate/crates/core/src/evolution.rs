//! Closed-system propagation under a flux-pulse schedule.
//!
//! The chain Hamiltonian is real symmetric and conserves excitation number,
//! so each sector is stepped on its own with real eigendecompositions. The
//! lab-frame product of midpoint exponentials is converted to the frame of
//! the idle Hamiltonian at the end, `U_sys = exp(i H_idle t_g) U_lab`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::device::{DeviceParams, DressedBasis, ExcitationBlock, SystemModel};
use crate::error::{Error, Result};
use crate::operators::{ComplexMatrix, FockLabel, C64, ONE, ZERO};
use crate::pulses::PulseSchedule;

pub const DEFAULT_DT_NS: f64 = 0.01;
/// Largest change of any propagator entry accepted when dt is halved.
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integrator {
    pub dt: f64,
    pub verify: bool,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT_NS,
            verify: true,
        }
    }
}

impl Integrator {
    pub fn new(dt: f64, verify: bool) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Validation(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { dt, verify })
    }

    pub fn unverified(dt: f64) -> Self {
        Self { dt, verify: false }
    }

    /// Number of uniform steps covering `duration` with spacing at most `dt`.
    pub fn steps(&self, duration: f64) -> usize {
        if duration <= 0.0 {
            0
        } else {
            ((duration / self.dt) - 1e-9).ceil().max(1.0) as usize
        }
    }
}

/// Row-major real symmetric eigendecomposition of a block Hamiltonian.
pub(crate) struct RealEigen {
    pub n: usize,
    pub values: Vec<f64>,
    /// Column `k` is eigenvector `k`; row-major storage.
    pub vectors: Vec<f64>,
}

pub(crate) fn real_eigen(h: &ComplexMatrix) -> Result<RealEigen> {
    let n = h.rows();
    if n == 1 {
        return Ok(RealEigen {
            n,
            values: vec![h[(0, 0)].re],
            vectors: vec![1.0],
        });
    }
    let m = DMatrix::from_fn(n, n, |r, c| 0.5 * (h[(r, c)].re + h[(c, r)].re));
    let e = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let mut vectors = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            vectors[r * n + c] = e.eigenvectors[(r, c)];
        }
    }
    Ok(RealEigen {
        n,
        values: e.eigenvalues.iter().copied().collect(),
        vectors,
    })
}

impl RealEigen {
    /// `V diag(exp(-i lambda t)) V^T`, row-major.
    pub fn propagator(&self, t: f64, out: &mut [C64]) {
        let n = self.n;
        let phases: Vec<C64> = self
            .values
            .iter()
            .map(|&l| C64::from_polar(1.0, -l * t))
            .collect();
        for r in 0..n {
            for c in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += phases[k] * (self.vectors[r * n + k] * self.vectors[c * n + k]);
                }
                out[r * n + c] = acc;
            }
        }
    }
}

/// `out = a * b` for row-major `n x n`.
pub(crate) fn matmul_into(n: usize, a: &[C64], b: &[C64], out: &mut [C64]) {
    out.iter_mut().for_each(|x| *x = ZERO);
    for r in 0..n {
        for k in 0..n {
            let s = a[r * n + k];
            if s == ZERO {
                continue;
            }
            let row = &b[k * n..(k + 1) * n];
            let dst = &mut out[r * n..(r + 1) * n];
            for (d, x) in dst.iter_mut().zip(row) {
                *d += s * x;
            }
        }
    }
}

fn identity(n: usize) -> Vec<C64> {
    let mut u = vec![ZERO; n * n];
    for k in 0..n {
        u[k * n + k] = ONE;
    }
    u
}

/// Lab-frame propagator of one sector. `observe(k, U)` is called after
/// every step `k = 1..=steps` with the accumulated product.
pub(crate) fn evolve_block_lab(
    block: &ExcitationBlock,
    s: &PulseSchedule,
    steps: usize,
    mut observe: impl FnMut(usize, &[C64]),
) -> Result<Vec<C64>> {
    let n = block.dim();
    let mut u = identity(n);
    if steps == 0 {
        return Ok(u);
    }
    let dt = s.t_gate() / steps as f64;
    let mut h = ComplexMatrix::zeros(n, n);
    let mut step = vec![ZERO; n * n];
    let mut next = vec![ZERO; n * n];
    for k in 0..steps {
        let t_mid = (k as f64 + 0.5) * dt;
        block.hamiltonian_into(&s.frequencies_at(t_mid), &mut h);
        real_eigen(&h)?.propagator(dt, &mut step);
        matmul_into(n, &step, &u, &mut next);
        std::mem::swap(&mut u, &mut next);
        observe(k + 1, &u);
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure(
            "non-finite propagator entries".into(),
        ));
    }
    Ok(u)
}

/// `exp(i H_idle t) U_lab` for one sector.
fn to_idle_frame(
    block: &ExcitationBlock,
    idle: &[f64; 3],
    t: f64,
    u_lab: &[C64],
) -> Result<Vec<C64>> {
    let n = block.dim();
    let e = real_eigen(&block.hamiltonian(idle))?;
    let mut frame = vec![ZERO; n * n];
    e.propagator(-t, &mut frame);
    let mut out = vec![ZERO; n * n];
    matmul_into(n, &frame, u_lab, &mut out);
    Ok(out)
}

/// Propagator restricted to one excitation sector, in the idle frame.
#[derive(Debug, Clone)]
pub struct BlockUnitary {
    pub excitations: usize,
    pub labels: Vec<FockLabel>,
    /// Flat `d^3` indices of `labels`.
    pub indices: Vec<usize>,
    pub unitary: ComplexMatrix,
}

#[derive(Debug, Clone)]
pub struct PropagatorResult {
    pub levels: usize,
    pub t_gate: f64,
    /// Step actually used (ns).
    pub dt: f64,
    pub steps: usize,
    pub blocks: Vec<BlockUnitary>,
    /// Max entry change when the step is halved, if verification ran.
    pub convergence: Option<f64>,
}

impl PropagatorResult {
    pub fn block(&self, excitations: usize) -> Option<&BlockUnitary> {
        self.blocks.iter().find(|b| b.excitations == excitations)
    }

    /// Embeds the sectors into a `d^3` matrix; unmodeled sectors are zero.
    pub fn full(&self) -> ComplexMatrix {
        let n = self.levels.pow(3);
        let mut u = ComplexMatrix::zeros(n, n);
        for b in &self.blocks {
            for (r, &ir) in b.indices.iter().enumerate() {
                for (c, &ic) in b.indices.iter().enumerate() {
                    u[(ir, ic)] = b.unitary[(r, c)];
                }
            }
        }
        u
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.unitary.unitarity_defect())
            .fold(0.0, f64::max)
    }

    /// True when verification ran and passed.
    pub fn verified(&self) -> bool {
        self.convergence.is_some_and(|c| c < VERIFY_TOL)
    }
}

fn propagate_once(
    model: &SystemModel,
    s: &PulseSchedule,
    steps: usize,
    sectors: &[usize],
) -> Result<Vec<BlockUnitary>> {
    sectors
        .iter()
        .map(|&b| {
            let block = model
                .blocks
                .get(b)
                .ok_or_else(|| Error::InvalidDimension(format!("sector N={b} not in model")))?;
            let lab = evolve_block_lab(block, s, steps, |_, _| {})?;
            let rot = to_idle_frame(block, &s.idle, s.t_gate(), &lab)?;
            let n = block.dim();
            Ok(BlockUnitary {
                excitations: block.excitations,
                labels: block.labels.clone(),
                indices: block.indices.clone(),
                unitary: ComplexMatrix::from_row_major(n, n, rot)?,
            })
        })
        .collect()
}

/// Propagates the selected excitation sectors of `model`.
pub fn propagate_sectors(
    model: &SystemModel,
    s: &PulseSchedule,
    integ: &Integrator,
    sectors: &[usize],
) -> Result<PropagatorResult> {
    s.validate()?;
    let steps = integ.steps(s.t_gate());
    let blocks = propagate_once(model, s, steps, sectors)?;
    let convergence = if integ.verify {
        let fine = propagate_once(model, s, 2 * steps, sectors)?;
        let diff = blocks
            .iter()
            .zip(&fine)
            .map(|(a, b)| (&a.unitary - &b.unitary).max_abs())
            .fold(0.0, f64::max);
        if diff >= VERIFY_TOL {
            log::warn!("step-halving check: propagator changed by {diff:.2e}");
        }
        Some(diff)
    } else {
        None
    };
    Ok(PropagatorResult {
        levels: model.levels(),
        t_gate: s.t_gate(),
        dt: if steps > 0 {
            s.t_gate() / steps as f64
        } else {
            integ.dt
        },
        steps,
        blocks,
        convergence,
    })
}

/// Full `d^3` propagator in the idle frame.
pub fn propagate(
    p: &DeviceParams,
    s: &PulseSchedule,
    integ: &Integrator,
) -> Result<PropagatorResult> {
    let model = SystemModel::new(p)?;
    let all: Vec<usize> = (0..model.blocks.len()).collect();
    propagate_sectors(&model, s, integ, &all)
}

/// Populations over time for one initial idle eigenstate.
///
/// `populations[k][i]` refers to `labels[i]`. The first and last rows are
/// measured in the idle eigenbasis; the rows in between in the bare basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationTrace {
    pub initial: FockLabel,
    pub times: Vec<f64>,
    pub labels: Vec<FockLabel>,
    pub populations: Vec<Vec<f64>>,
}

impl PopulationTrace {
    pub fn column(&self, label: &FockLabel) -> Option<Vec<f64>> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(self.populations.iter().map(|row| row[i]).collect())
    }

    pub fn final_population(&self, label: &FockLabel) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == label)?;
        self.populations.last().map(|row| row[i])
    }

    /// Population outside the computational labels, per time.
    pub fn leakage(&self) -> Vec<f64> {
        self.populations
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.labels)
                    .filter(|(_, l)| !l.is_computational())
                    .map(|(p, _)| p)
                    .sum()
            })
            .collect()
    }

    pub fn csv_header(&self) -> Vec<String> {
        std::iter::once("t_ns".to_string())
            .chain(self.labels.iter().map(|l| format!("pop_{l}")))
            .collect()
    }

    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        self.times
            .iter()
            .zip(&self.populations)
            .map(|(t, row)| std::iter::once(*t).chain(row.iter().copied()).collect())
            .collect()
    }
}

/// Evolves the idle eigenstate of `initial`, sampling every `sample_every` steps.
pub fn population_trace(
    p: &DeviceParams,
    s: &PulseSchedule,
    initial: FockLabel,
    integ: &Integrator,
    sample_every: usize,
) -> Result<PopulationTrace> {
    s.validate()?;
    let d = p.levels;
    if initial.0.iter().any(|&n| n >= d) {
        return Err(Error::Validation(format!(
            "|{initial}> outside d={d} truncation"
        )));
    }
    let model = SystemModel::truncated(p, initial.excitations())?;
    let basis = DressedBasis::new(&model, &s.idle)?;
    let start = basis.state(&initial)?.clone();
    let block = &model.blocks[start.block];
    let n = block.dim();
    let steps = integ.steps(s.t_gate());
    let dt = if steps > 0 {
        s.t_gate() / steps as f64
    } else {
        0.0
    };
    let stride = sample_every.max(1);

    let labels: Vec<FockLabel> = FockLabel::all(d).collect();
    let bare_row = |psi: &[C64]| -> Vec<f64> {
        let mut row = vec![0.0; d.pow(3)];
        for (amp, &idx) in psi.iter().zip(&block.indices) {
            row[idx] = amp.norm_sqr();
        }
        row
    };
    let dressed_row = |psi: &[C64]| -> Vec<f64> {
        let mut row = vec![0.0; d.pow(3)];
        for l in &block.labels {
            if let Some(st) = basis.state_unchecked(l) {
                let ov: C64 = st
                    .amplitudes
                    .iter()
                    .zip(psi)
                    .map(|(v, x)| v.conj() * x)
                    .sum();
                row[l.index(d)] = ov.norm_sqr();
            }
        }
        row
    };
    let apply = |u: &[C64]| -> Vec<C64> {
        (0..n)
            .map(|r| (0..n).map(|c| u[r * n + c] * start.amplitudes[c]).sum())
            .collect()
    };

    let mut times = vec![0.0];
    let mut populations = vec![dressed_row(&start.amplitudes)];
    let final_u = evolve_block_lab(block, s, steps, |k, u| {
        if k % stride == 0 && k < steps {
            times.push(k as f64 * dt);
            populations.push(bare_row(&apply(u)));
        }
    })?;
    if steps > 0 {
        times.push(s.t_gate());
        populations.push(dressed_row(&apply(&final_u)));
    }
    Ok(PopulationTrace {
        initial,
        times,
        labels,
        populations,
    })
}

/// Leakage out of the computational subspace over time, per initial state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeakageTrace {
    pub times: Vec<f64>,
    pub series: Vec<(FockLabel, Vec<f64>)>,
}

impl LeakageTrace {
    pub fn worst_final(&self) -> f64 {
        self.series
            .iter()
            .filter_map(|(_, v)| v.last().copied())
            .fold(0.0, f64::max)
    }
}

pub fn leakage_trace(
    p: &DeviceParams,
    s: &PulseSchedule,
    initials: &[FockLabel],
    integ: &Integrator,
    sample_every: usize,
) -> Result<LeakageTrace> {
    let mut times = Vec::new();
    let mut series = Vec::new();
    for &l in initials {
        let tr = population_trace(p, s, l, integ, sample_every)?;
        times = tr.times.clone();
        series.push((l, tr.leakage()));
    }
    Ok(LeakageTrace { times, series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::build_hamiltonian;
    use crate::operators::expm_skew_hermitian;
    use crate::units::ghz;

    fn table1_schedule(t_hold: f64) -> PulseSchedule {
        let p = DeviceParams::table1();
        PulseSchedule::new(
            p.idle,
            [ghz(6.0), ghz(6.35), ghz(6.0)],
            0.0,
            0.0,
            t_hold,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn step_count() {
        let i = Integrator::unverified(0.01);
        assert_eq!(i.steps(0.0), 0);
        assert_eq!(i.steps(1.0), 100);
        assert_eq!(i.steps(1.005), 101);
    }

    #[test]
    fn pinned_frequencies_match_single_exponential() {
        // Idle equal to target: H(t) = H(0), so U_sys = identity and U_lab = exp(-iHt).
        let p = DeviceParams::table1();
        let f = [ghz(5.9), ghz(6.35), ghz(6.0)];
        let s = PulseSchedule::new(f, f, 0.0, 0.0, 5.0, 1.0).unwrap();
        let model = SystemModel::new(&p).unwrap();
        let block = &model.blocks[2];
        let steps = 37;
        let lab = evolve_block_lab(block, &s, steps, |_, _| {}).unwrap();
        let lab = ComplexMatrix::from_row_major(block.dim(), block.dim(), lab).unwrap();
        let exact = expm_skew_hermitian(&block.hamiltonian(&f), s.t_gate()).unwrap();
        assert!((&lab - &exact).max_abs() < 1e-10);
        let r = propagate(&p, &s, &Integrator::unverified(0.05)).unwrap();
        assert!((&r.full() - &ComplexMatrix::identity(64)).max_abs() < 1e-10);
    }

    #[test]
    fn zero_duration_is_identity() {
        let p = DeviceParams::table1();
        let model = SystemModel::new(&p).unwrap();
        let s = table1_schedule(0.0);
        let u = evolve_block_lab(&model.blocks[1], &s, 0, |_, _| {}).unwrap();
        assert_eq!(u, identity(3));
    }

    #[test]
    fn full_propagator_is_unitary_and_block_structured() {
        let p = DeviceParams::table1();
        let s = table1_schedule(10.0);
        let r = propagate(&p, &s, &Integrator::unverified(0.02)).unwrap();
        assert!(r.unitarity_defect() < 1e-10);
        let u = r.full();
        assert!(u.unitarity_defect() < 1e-10);
        let d = p.levels;
        for a in FockLabel::all(d) {
            for b in FockLabel::all(d) {
                if a.excitations() != b.excitations() {
                    assert_eq!(u[(a.index(d), b.index(d))], ZERO);
                }
            }
        }
    }

    #[test]
    fn block_stepping_matches_dense_stepping() {
        let p = DeviceParams::table1();
        let s = table1_schedule(3.0);
        let steps = 200;
        let dt = s.t_gate() / steps as f64;
        let mut dense = ComplexMatrix::identity(64);
        for k in 0..steps {
            let h = build_hamiltonian(&p, &s.frequencies_at((k as f64 + 0.5) * dt)).unwrap();
            dense = expm_skew_hermitian(&h, dt).unwrap().matmul(&dense);
        }
        let h0 = build_hamiltonian(&p, &s.idle).unwrap();
        let dense = expm_skew_hermitian(&h0, -s.t_gate())
            .unwrap()
            .matmul(&dense);
        let r = propagate(&p, &s, &Integrator::unverified(dt)).unwrap();
        assert_eq!(r.steps, steps);
        assert!((&r.full() - &dense).max_abs() < 1e-9);
    }

    #[test]
    fn uncoupled_chain_has_no_leakage() {
        let p = DeviceParams::table1().with_coupling([0.0, 0.0]);
        let s = table1_schedule(20.0);
        let tr = leakage_trace(
            &p,
            &s,
            &[FockLabel::new(1, 1, 1), FockLabel::new(1, 0, 1)],
            &Integrator::unverified(0.02),
            50,
        )
        .unwrap();
        for (_, v) in &tr.series {
            assert!(v.iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn detuned_short_pulse_keeps_population() {
        let p = DeviceParams::table1();
        let s = PulseSchedule::new(p.idle, [ghz(5.5), ghz(6.35), ghz(5.9)], 0.0, 0.0, 0.0, 1.0)
            .unwrap();
        let tr = population_trace(
            &p,
            &s,
            FockLabel::new(1, 0, 0),
            &Integrator::unverified(0.01),
            10,
        )
        .unwrap();
        assert!(tr.final_population(&FockLabel::new(1, 0, 0)).unwrap() > 0.99);
    }

    #[test]
    fn populations_conserve_norm_within_sector() {
        let p = DeviceParams::table1();
        let s = table1_schedule(15.0);
        let tr = population_trace(
            &p,
            &s,
            FockLabel::new(1, 1, 1),
            &Integrator::unverified(0.01),
            25,
        )
        .unwrap();
        for row in &tr.populations {
            let total: f64 = row.iter().sum();
            assert!((total - 1.0).abs() < 1e-8);
            for (l, v) in tr.labels.iter().zip(row) {
                if l.excitations() != 3 {
                    assert_eq!(*v, 0.0);
                }
            }
        }
    }
}
