//! Lindblad dynamics, open-system gate fidelity and the analytic
//! decoherence budget.
//!
//! Density matrices are vectorized by stacking columns, so
//! `vec(A rho B) = (B^T (x) A) vec(rho)` and a unitary acts as `U* (x) U`.
//! Decay `C[q_l]` runs at `1/T1` and dephasing `C[n_l]` at `2/T_phi`, which
//! makes a qubit coherence decay as `exp(-t/(2 T1) - t/T_phi)`.

use serde::{Deserialize, Serialize};

use crate::device::{DeviceParams, DressedBasis, LogicalBasis, SystemModel};
use crate::error::{Error, Result};
use crate::evolution::{real_eigen, Integrator, VERIFY_TOL};
use crate::exec::{par_map, Execution};
use crate::gate_metrics::{gate_report, ideal_ciswap, z_phase_diagonal, GateReport};
use crate::operators::{
    annihilation, eigh, embed, expm_skew_hermitian, number, ComplexMatrix, FockLabel, C64, ONE,
    ZERO,
};
use crate::pulses::PulseSchedule;
use crate::units::us;

/// Default Lindblad step (ns).
pub const OPEN_DT_NS: f64 = 0.005;

/// Relaxation and pure-dephasing times per qubit, in ns. `f64::INFINITY`
/// switches a channel off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub t1: [f64; 3],
    pub tphi: [f64; 3],
}

impl NoiseParams {
    pub fn closed() -> Self {
        Self {
            t1: [f64::INFINITY; 3],
            tphi: [f64::INFINITY; 3],
        }
    }

    /// Same times on all three qubits, in microseconds.
    pub fn uniform_us(t1_us: f64, tphi_us: f64) -> Result<Self> {
        let n = Self {
            t1: [us(t1_us); 3],
            tphi: [us(tphi_us); 3],
        };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        for &t in self.t1.iter().chain(&self.tphi) {
            if !(t > 0.0) || t.is_nan() {
                return Err(Error::Validation(format!(
                    "coherence time must be > 0 or infinite, got {t}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_closed(&self) -> bool {
        self.t1.iter().chain(&self.tphi).all(|t| t.is_infinite())
    }

    fn decay_rates(&self) -> [f64; 3] {
        self.t1.map(|t| 1.0 / t)
    }

    fn dephasing_rates(&self) -> [f64; 3] {
        self.tphi.map(|t| 2.0 / t)
    }
}

/// One term `rate * C[op]` of the master equation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dissipator {
    pub rate: f64,
    pub op: ComplexMatrix,
}

/// Decay and dephasing of a single oscillator with `levels` levels.
pub fn qubit_dissipators(levels: usize, t1: f64, tphi: f64) -> Result<Vec<Dissipator>> {
    Ok(vec![
        Dissipator {
            rate: 1.0 / t1,
            op: annihilation(levels)?,
        },
        Dissipator {
            rate: 2.0 / tphi,
            op: number(levels)?,
        },
    ])
}

/// Dissipators of the three-oscillator chain on the full `d^3` space.
pub fn chain_dissipators(noise: &NoiseParams, levels: usize) -> Result<Vec<Dissipator>> {
    let a = annihilation(levels)?;
    let n = number(levels)?;
    let mut out = Vec::new();
    for l in 0..3 {
        out.push(Dissipator {
            rate: 1.0 / noise.t1[l],
            op: embed(&a, l, levels)?,
        });
        out.push(Dissipator {
            rate: 2.0 / noise.tphi[l],
            op: embed(&n, l, levels)?,
        });
    }
    Ok(out)
}

/// `sum_k rate_k C[O_k] rho` with `C[O] rho = O rho O^dag - {O^dag O, rho}/2`.
pub fn dissipate(rho: &ComplexMatrix, ops: &[Dissipator]) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(rho.rows(), rho.cols());
    for d in ops.iter().filter(|d| d.rate > 0.0) {
        let o = &d.op;
        let od = o.dagger();
        let odo = od.matmul(o);
        let jump = o.matmul(rho).matmul(&od);
        let anti = &odo.matmul(rho) + &rho.matmul(&odo);
        out = &out + &(&jump - &anti.scale_real(0.5)).scale_real(d.rate);
    }
    out
}

/// `exp(h D) rho` for the dissipator alone, by Taylor series on substeps
/// small enough for fast convergence.
fn dissipate_exp(rho: &ComplexMatrix, ops: &[Dissipator], h: f64) -> ComplexMatrix {
    let scale: f64 = ops
        .iter()
        .filter(|d| d.rate > 0.0)
        .map(|d| d.rate * d.op.frobenius_norm().powi(2))
        .sum();
    if scale == 0.0 || h == 0.0 {
        return rho.clone();
    }
    let sub = (h * scale / 0.25).ceil().max(1.0) as usize;
    let hs = h / sub as f64;
    let mut x = rho.clone();
    for _ in 0..sub {
        let mut term = x.clone();
        let mut acc = x.clone();
        for k in 1..40 {
            term = dissipate(&term, ops).scale_real(hs / k as f64);
            acc = &acc + &term;
            if term.max_abs() < 1e-18 * acc.max_abs().max(1e-300) {
                break;
            }
        }
        x = acc;
    }
    x
}

/// One Strang step: half dissipation, `exp(-i H dt)`, half dissipation.
pub fn lindblad_step(
    rho: &ComplexMatrix,
    h: &ComplexMatrix,
    ops: &[Dissipator],
    dt: f64,
) -> Result<ComplexMatrix> {
    let before = rho.trace();
    let u = expm_skew_hermitian(h, dt)?;
    let x = dissipate_exp(rho, ops, dt / 2.0);
    let x = u.matmul(&x).matmul(&u.dagger());
    let x = dissipate_exp(&x, ops, dt / 2.0);
    let drift = (x.trace() - before).norm();
    if drift > 1e-6 {
        return Err(Error::NumericalFailure(format!(
            "trace drift {drift:.2e} in Lindblad step"
        )));
    }
    Ok(x)
}

/// Column-stacked `vec(rho)`.
pub fn vectorize(rho: &ComplexMatrix) -> Vec<C64> {
    let (r, c) = (rho.rows(), rho.cols());
    (0..c)
        .flat_map(|j| (0..r).map(move |i| (i, j)))
        .map(|(i, j)| rho[(i, j)])
        .collect()
}

pub fn unvectorize(v: &[C64], n: usize) -> Result<ComplexMatrix> {
    if v.len() != n * n {
        return Err(Error::InvalidDimension(format!(
            "vector of length {} is not {n}x{n}",
            v.len()
        )));
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| v[j * n + i]))
}

/// Dense Liouvillian `-i(I (x) H - H^T (x) I) + sum rate [O* (x) O - I (x) O^dag O / 2 - (O^dag O)^T (x) I / 2]`.
pub fn liouvillian(h: &ComplexMatrix, ops: &[Dissipator]) -> ComplexMatrix {
    let n = h.rows();
    let id = ComplexMatrix::identity(n);
    let mi = C64::new(0.0, -1.0);
    let mut l = (&id.kron(h) - &h.transpose().kron(&id)).scale(mi);
    for d in ops.iter().filter(|d| d.rate > 0.0) {
        let odo = d.op.dagger().matmul(&d.op);
        let term = &(&d.op.conj().kron(&d.op) - &id.kron(&odo).scale_real(0.5))
            - &odo.transpose().kron(&id).scale_real(0.5);
        l = &l + &term.scale_real(d.rate);
    }
    l
}

/// Per-sector data for the restricted propagation.
struct SectorInfo {
    n: usize,
    occ: Vec<[f64; 3]>,
    /// `jumps[l]`: `(source in this sector, target in the sector below, sqrt(n_l))`.
    jumps: [Vec<(usize, usize, f64)>; 3],
}

fn sector_layout(model: &SystemModel) -> Vec<SectorInfo> {
    let mut out: Vec<SectorInfo> = Vec::new();
    for (a, blk) in model.blocks.iter().enumerate() {
        let occ: Vec<[f64; 3]> = (0..blk.dim()).map(|k| blk.occupation(k)).collect();
        let mut jumps: [Vec<(usize, usize, f64)>; 3] = Default::default();
        if a > 0 {
            let below = &model.blocks[a - 1];
            for (r, lab) in blk.labels.iter().enumerate() {
                for (l, js) in jumps.iter_mut().enumerate() {
                    let n = lab.0[l];
                    if n == 0 {
                        continue;
                    }
                    let mut low = lab.0;
                    low[l] -= 1;
                    if let Some(dst) = below.position(&FockLabel(low)) {
                        js.push((r, dst, (n as f64).sqrt()));
                    }
                }
            }
        }
        out.push(SectorInfo {
            n: blk.dim(),
            occ,
            jumps,
        });
    }
    out
}

/// Density-matrix image of `|v_i><v_j|`: blocks `(Ni - k, Nj - k)`.
#[derive(Clone)]
struct ColumnState {
    top: (usize, usize),
    pairs: Vec<Vec<C64>>,
}

impl ColumnState {
    fn sectors(&self, k: usize) -> (usize, usize) {
        (self.top.0 - k, self.top.1 - k)
    }
}

fn dissipator_action(
    c: &ColumnState,
    layout: &[SectorInfo],
    g1: &[f64; 3],
    gphi: &[f64; 3],
) -> Vec<Vec<C64>> {
    let mut out: Vec<Vec<C64>> = c.pairs.iter().map(|p| vec![ZERO; p.len()]).collect();
    for k in 0..c.pairs.len() {
        let (a, b) = c.sectors(k);
        let (sa, sb) = (&layout[a], &layout[b]);
        let rho = &c.pairs[k];
        let dst = &mut out[k];
        for r in 0..sa.n {
            for q in 0..sb.n {
                let (nr, nc) = (sa.occ[r], sb.occ[q]);
                let mut kappa = 0.0;
                for l in 0..3 {
                    let diff = nr[l] - nc[l];
                    kappa += 0.5 * g1[l] * (nr[l] + nc[l]) + 0.5 * gphi[l] * diff * diff;
                }
                dst[r * sb.n + q] -= rho[r * sb.n + q] * kappa;
            }
        }
        if k > 0 {
            let (ua, ub) = (&layout[a + 1], &layout[b + 1]);
            let src = &c.pairs[k - 1];
            for l in 0..3 {
                if g1[l] == 0.0 {
                    continue;
                }
                for &(sr, dr, ar) in &ua.jumps[l] {
                    for &(sc, dc, ac) in &ub.jumps[l] {
                        dst[dr * sb.n + dc] += src[sr * ub.n + sc] * (g1[l] * ar * ac);
                    }
                }
            }
        }
    }
    out
}

fn dissipate_column(
    c: &mut ColumnState,
    layout: &[SectorInfo],
    g1: &[f64; 3],
    gphi: &[f64; 3],
    h: f64,
) {
    // Second order is exact to rounding: h * rate is below 1e-5 here.
    let d1 = dissipator_action(c, layout, g1, gphi);
    let tmp = ColumnState {
        top: c.top,
        pairs: d1.clone(),
    };
    let d2 = dissipator_action(&tmp, layout, g1, gphi);
    for ((p, x), y) in c.pairs.iter_mut().zip(&d1).zip(&d2) {
        for ((v, a), b) in p.iter_mut().zip(x).zip(y) {
            *v += a * h + b * (0.5 * h * h);
        }
    }
}

/// `U_a rho U_b^dag` for row-major blocks.
fn sandwich(ua: &[C64], na: usize, rho: &mut [C64], ub: &[C64], nb: usize, tmp: &mut Vec<C64>) {
    tmp.clear();
    tmp.resize(na * nb, ZERO);
    for r in 0..na {
        for k in 0..na {
            let s = ua[r * na + k];
            if s == ZERO {
                continue;
            }
            for c in 0..nb {
                tmp[r * nb + c] += s * rho[k * nb + c];
            }
        }
    }
    for r in 0..na {
        for c in 0..nb {
            let mut acc = ZERO;
            for k in 0..nb {
                acc += tmp[r * nb + k] * ub[c * nb + k].conj();
            }
            rho[r * nb + c] = acc;
        }
    }
}

/// Logical block of the evolution superoperator, one entry per requested
/// column `|i><j|` of logical states (binary order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialSuperoperator {
    pub columns: Vec<(usize, usize)>,
    /// `<v_k| P_U(|v_i><v_j|) |v_l>` as an 8x8 matrix per column, idle frame.
    pub logical: Vec<ComplexMatrix>,
    /// Full trace of each evolved column.
    pub traces: Vec<C64>,
    /// Smallest eigenvalue over the evolved diagonal columns.
    pub min_eigenvalue: f64,
    pub t_gate: f64,
    pub dt: f64,
    pub steps: usize,
    pub convergence: Option<f64>,
}

impl PartialSuperoperator {
    pub fn column(&self, i: usize, j: usize) -> Option<&ComplexMatrix> {
        self.columns
            .iter()
            .position(|&c| c == (i, j))
            .map(|k| &self.logical[k])
    }
}

/// All 64 logical columns.
pub fn logical_columns() -> Vec<(usize, usize)> {
    (0..8).flat_map(|i| (0..8).map(move |j| (i, j))).collect()
}

fn evolve_columns(
    model: &SystemModel,
    basis: &LogicalBasis,
    s: &PulseSchedule,
    noise: &NoiseParams,
    steps: usize,
    columns: &[(usize, usize)],
) -> Result<(Vec<ComplexMatrix>, Vec<C64>, f64)> {
    let layout = sector_layout(model);
    let g1 = noise.decay_rates();
    let gphi = noise.dephasing_rates();
    let init = |&(i, j): &(usize, usize)| {
        let (vi, vj) = (&basis.states[i], &basis.states[j]);
        let top = (vi.block, vj.block);
        let depth = top.0.min(top.1) + 1;
        let mut pairs = Vec::with_capacity(depth);
        for k in 0..depth {
            let (a, b) = (top.0 - k, top.1 - k);
            let (na, nb) = (layout[a].n, layout[b].n);
            pairs.push(if k == 0 {
                (0..na * nb)
                    .map(|x| vi.amplitudes[x / nb] * vj.amplitudes[x % nb].conj())
                    .collect()
            } else {
                vec![ZERO; na * nb]
            });
        }
        ColumnState { top, pairs }
    };
    let mut states: Vec<ColumnState> = columns.iter().map(init).collect();
    let dt = if steps > 0 {
        s.t_gate() / steps as f64
    } else {
        0.0
    };
    let noisy = !noise.is_closed();
    let mut tmp = Vec::new();
    let mut props: Vec<Vec<C64>> = layout.iter().map(|si| vec![ZERO; si.n * si.n]).collect();
    if noisy && steps > 0 {
        for c in states.iter_mut() {
            dissipate_column(c, &layout, &g1, &gphi, dt / 2.0);
        }
    }
    for k in 0..steps {
        let f = s.frequencies_at((k as f64 + 0.5) * dt);
        for (a, blk) in model.blocks.iter().enumerate() {
            real_eigen(&blk.hamiltonian(&f))?.propagator(dt, &mut props[a]);
        }
        for c in states.iter_mut() {
            for q in 0..c.pairs.len() {
                let (a, b) = c.sectors(q);
                sandwich(
                    &props[a],
                    layout[a].n,
                    &mut c.pairs[q],
                    &props[b],
                    layout[b].n,
                    &mut tmp,
                );
            }
            if noisy {
                let h = if k + 1 == steps { dt / 2.0 } else { dt };
                dissipate_column(c, &layout, &g1, &gphi, h);
            }
        }
    }
    // Idle frame: rho -> exp(i H_idle t) rho exp(-i H_idle t).
    let t_g = s.t_gate();
    for (a, blk) in model.blocks.iter().enumerate() {
        real_eigen(&blk.hamiltonian(&s.idle))?.propagator(-t_g, &mut props[a]);
    }
    let mut logical = Vec::with_capacity(states.len());
    let mut traces = Vec::with_capacity(states.len());
    let mut min_eig = f64::INFINITY;
    for c in states.iter_mut() {
        for q in 0..c.pairs.len() {
            let (a, b) = c.sectors(q);
            sandwich(
                &props[a],
                layout[a].n,
                &mut c.pairs[q],
                &props[b],
                layout[b].n,
                &mut tmp,
            );
        }
        if c.pairs.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure("non-finite density matrix".into()));
        }
        let mut tr = ZERO;
        if c.top.0 == c.top.1 {
            for (q, p) in c.pairs.iter().enumerate() {
                let n = layout[c.top.0 - q].n;
                tr += (0..n).map(|r| p[r * n + r]).sum::<C64>();
            }
        }
        let m = ComplexMatrix::from_fn(8, 8, |kk, ll| {
            let (vk, vl) = (&basis.states[kk], &basis.states[ll]);
            if vk.block > c.top.0 || vl.block > c.top.1 || c.top.0 - vk.block != c.top.1 - vl.block
            {
                return ZERO;
            }
            let q = c.top.0 - vk.block;
            let nb = layout[vl.block].n;
            let p = &c.pairs[q];
            let mut acc = ZERO;
            for (r, ar) in vk.amplitudes.iter().enumerate() {
                for (cc, ac) in vl.amplitudes.iter().enumerate() {
                    acc += ar.conj() * p[r * nb + cc] * ac;
                }
            }
            acc
        });
        logical.push(m);
        traces.push(tr);
        if c.top.0 == c.top.1 && columns[traces.len() - 1].0 == columns[traces.len() - 1].1 {
            for (q, p) in c.pairs.iter().enumerate() {
                let n = layout[c.top.0 - q].n;
                let h = ComplexMatrix::from_fn(n, n, |r, cc| {
                    0.5 * (p[r * n + cc] + p[cc * n + r].conj())
                });
                let e = eigh(&h)?;
                min_eig = min_eig.min(e.values[0]);
            }
        }
    }
    Ok((logical, traces, min_eig))
}

/// Evolves the requested logical columns `|v_i><v_j|` through the pulse.
///
/// Only sectors with at most three excitations are kept: decay moves
/// weight downwards and the Hamiltonian conserves excitation number, so the
/// logical block is closed under the dynamics.
pub fn evolve_superoperator(
    p: &DeviceParams,
    s: &PulseSchedule,
    noise: &NoiseParams,
    integ: &Integrator,
    columns: &[(usize, usize)],
) -> Result<PartialSuperoperator> {
    noise.validate()?;
    s.validate()?;
    if let Some(&(i, j)) = columns.iter().find(|&&(i, j)| i > 7 || j > 7) {
        return Err(Error::Range(format!(
            "column ({i}, {j}) outside the logical block"
        )));
    }
    let model = SystemModel::truncated(p, 3)?;
    let basis = LogicalBasis::from_dressed(&model, &DressedBasis::new(&model, &s.idle)?)?;
    let steps = integ.steps(s.t_gate());
    let (logical, traces, min_eig) = evolve_columns(&model, &basis, s, noise, steps, columns)?;
    for (k, (&(i, j), tr)) in columns.iter().zip(&traces).enumerate() {
        let expect = if i == j { ONE } else { ZERO };
        let drift = (tr - expect).norm();
        if drift > 1e-6 {
            return Err(Error::NumericalFailure(format!(
                "trace drift {drift:.2e} in column {k} ({i}, {j})"
            )));
        }
    }
    let convergence = if integ.verify {
        let (fine, _, _) = evolve_columns(&model, &basis, s, noise, 2 * steps, columns)?;
        let diff = logical
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).max_abs())
            .fold(0.0, f64::max);
        if diff >= VERIFY_TOL {
            log::warn!("Lindblad step-halving check: change {diff:.2e}");
        }
        Some(diff)
    } else {
        None
    };
    Ok(PartialSuperoperator {
        columns: columns.to_vec(),
        logical,
        traces,
        min_eigenvalue: min_eig,
        t_gate: s.t_gate(),
        dt: if steps > 0 {
            s.t_gate() / steps as f64
        } else {
            integ.dt
        },
        steps,
        convergence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpenFidelity {
    pub fidelity: f64,
    pub leakage: f64,
}

/// `F_o = [8(1 - L1) + Tr(P_U^dag P_target)] / 72` and
/// `L1 = 1 - sum_i Tr_c(P_U |i><i|) / 8`, with `Tr_c` over the logical block.
///
/// `phases` are (post, pre) single-qubit Z corrections applied to the
/// implemented map, as in the closed-system phase optimization.
pub fn open_fidelity(
    ps: &PartialSuperoperator,
    target: &ComplexMatrix,
    phases: Option<(&[f64; 3], &[f64; 3])>,
) -> Result<OpenFidelity> {
    if target.rows() != 8 || target.cols() != 8 {
        return Err(Error::InvalidDimension("target must be 8x8".into()));
    }
    let (post, pre) = match phases {
        Some((a, b)) => (z_phase_diagonal(a), z_phase_diagonal(b)),
        None => ([0.0; 8], [0.0; 8]),
    };
    let mut pop = 0.0;
    let mut overlap = ZERO;
    for i in 0..8 {
        for j in 0..8 {
            let m = ps.column(i, j).ok_or_else(|| {
                Error::Validation(format!(
                    "logical block incomplete: column ({i}, {j}) missing"
                ))
            })?;
            let w = C64::from_polar(1.0, pre[i] - pre[j]);
            let dressed =
                |k: usize, l: usize| m[(k, l)] * w * C64::from_polar(1.0, post[k] - post[l]);
            if i == j {
                pop += (0..8).map(|k| dressed(k, k).re).sum::<f64>();
            }
            // conj(t_i^dag M_ij t_j)
            let mut acc = ZERO;
            for k in 0..8 {
                let tk = target[(k, i)].conj();
                if tk == ZERO {
                    continue;
                }
                for l in 0..8 {
                    acc += tk * dressed(k, l) * target[(l, j)];
                }
            }
            overlap += acc.conj();
        }
    }
    let leakage = 1.0 - pop / 8.0;
    Ok(OpenFidelity {
        fidelity: (8.0 * (1.0 - leakage) + overlap.re) / 72.0,
        leakage,
    })
}

/// Single-qubit idling fidelity `F_I` and the three-qubit estimate `F_I^3`.
pub fn idling_fidelity(t: f64, t1: f64, tphi: f64) -> (f64, f64) {
    let f = (3.0 + (-t / t1).exp() + 2.0 * (-t * (0.5 / t1 + 1.0 / tphi)).exp()) / 6.0;
    (f, f.powi(3))
}

/// `3 (1 - F_I)`: infidelity of three idling qubits.
pub fn epsilon_t1(t: f64, t1: f64, tphi: f64) -> f64 {
    3.0 * (1.0 - idling_fidelity(t, t1, tphi).0)
}

/// Amplitude-damping plus dephasing Kraus operators `(M0, M1, M2)`.
pub fn kraus_channel(t: f64, t1: f64, tphi: f64) -> Result<[ComplexMatrix; 3]> {
    if !(t >= 0.0) {
        return Err(Error::Validation(format!("t must be >= 0, got {t}")));
    }
    let decay = (-t / t1).exp();
    let lambda = decay * (1.0 - (-2.0 * t / tphi).exp());
    let gamma = 1.0 - decay;
    if lambda + gamma > 1.0 + 1e-15 {
        return Err(Error::Validation(format!(
            "lambda + gamma = {} exceeds 1",
            lambda + gamma
        )));
    }
    let r = |x: f64| C64::new(x.max(0.0).sqrt(), 0.0);
    Ok([
        ComplexMatrix::from_row_major(2, 2, vec![ONE, ZERO, ZERO, r(1.0 - lambda - gamma)])?,
        ComplexMatrix::from_row_major(2, 2, vec![ZERO, ZERO, ZERO, r(lambda)])?,
        ComplexMatrix::from_row_major(2, 2, vec![ZERO, r(gamma), ZERO, ZERO])?,
    ])
}

pub fn apply_kraus(ops: &[ComplexMatrix], rho: &ComplexMatrix) -> ComplexMatrix {
    ops.iter()
        .fold(ComplexMatrix::zeros(rho.rows(), rho.cols()), |acc, m| {
            &acc + &m.matmul(rho).matmul(&m.dagger())
        })
}

/// `[Tr(sum M^dag M) + sum |Tr M|^2] / 6`.
pub fn kraus_fidelity(ops: &[ComplexMatrix]) -> f64 {
    let a: f64 = ops.iter().map(|m| m.dagger().matmul(m).trace().re).sum();
    let b: f64 = ops.iter().map(|m| m.trace().norm_sqr()).sum();
    (a + b) / 6.0
}

/// One point of the decoherence budget. Times in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherencePoint {
    pub t1_us: f64,
    pub eps_full: f64,
    pub eps_intrinsic: f64,
    pub eps_t1: f64,
    pub leakage: f64,
}

/// Open-system fidelity of the gate `U` defined by `s`, judged against the
/// C-iSWAP target with the closed-system Z corrections.
pub fn gate_open_fidelity(
    p: &DeviceParams,
    s: &PulseSchedule,
    noise: &NoiseParams,
    integ: &Integrator,
    closed: &GateReport,
) -> Result<(OpenFidelity, PartialSuperoperator)> {
    let ps = evolve_superoperator(p, s, noise, integ, &logical_columns())?;
    let fo = open_fidelity(
        &ps,
        &ideal_ciswap(),
        Some((&closed.phases.post, &closed.phases.pre)),
    )?;
    Ok((fo, ps))
}

/// `eps_full = 1 - F_o`, `eps_intrinsic = 1 - F`, and `eps_T1` at `t_g`,
/// with `T_phi` infinite, for each `T1` in microseconds.
pub fn decoherence_curve(
    p: &DeviceParams,
    s: &PulseSchedule,
    t1_us: &[f64],
    integ: &Integrator,
    exec: Execution,
) -> Result<Vec<DecoherencePoint>> {
    let closed = gate_report(p, s, &Integrator::unverified(integ.dt))?;
    let points = par_map(exec, t1_us, |&t1| -> Result<DecoherencePoint> {
        let noise = NoiseParams::uniform_us(t1, f64::INFINITY)?;
        let (fo, _) = gate_open_fidelity(p, s, &noise, integ, &closed)?;
        Ok(DecoherencePoint {
            t1_us: t1,
            eps_full: 1.0 - fo.fidelity,
            eps_intrinsic: 1.0 - closed.fidelity,
            eps_t1: epsilon_t1(s.t_gate(), us(t1), f64::INFINITY),
            leakage: fo.leakage,
        })
    });
    points.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::propagate_sectors;
    use crate::gate_metrics::project_sectors;
    use crate::units::ghz;
    use approx::assert_abs_diff_eq;

    fn qubit_rho(p1: f64, coh: C64) -> ComplexMatrix {
        ComplexMatrix::from_row_major(
            2,
            2,
            vec![C64::new(1.0 - p1, 0.0), coh, coh.conj(), C64::new(p1, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn closed_step_is_unitary() {
        let h = crate::operators::pauli::x();
        let rho = qubit_rho(0.3, C64::new(0.1, 0.2));
        let ops = qubit_dissipators(2, f64::INFINITY, f64::INFINITY).unwrap();
        let out = lindblad_step(&rho, &h, &ops, 0.7).unwrap();
        let u = expm_skew_hermitian(&h, 0.7).unwrap();
        let expect = u.matmul(&rho).matmul(&u.dagger());
        assert!((&out - &expect).max_abs() < 1e-10);
    }

    #[test]
    fn pure_decay_and_coherence() {
        let (t1, tphi, t) = (20.0, 30.0, 7.0);
        let ops = qubit_dissipators(2, t1, tphi).unwrap();
        let h = ComplexMatrix::zeros(2, 2);
        let rho = qubit_rho(1.0, ZERO);
        let out = lindblad_step(&rho, &h, &ops, t).unwrap();
        assert_abs_diff_eq!(out[(1, 1)].re, (-t / t1).exp(), epsilon = 1e-12);
        let rho = qubit_rho(0.5, C64::new(0.5, 0.0));
        let out = lindblad_step(&rho, &h, &ops, t).unwrap();
        let expect = 0.5 * (-t * (0.5 / t1 + 1.0 / tphi)).exp();
        assert_abs_diff_eq!(out[(0, 1)].re, expect, epsilon = 1e-12);
    }

    #[test]
    fn liouvillian_matches_direct_action() {
        let h = ComplexMatrix::from_fn(3, 3, |r, c| {
            C64::new(
                (r + c) as f64 * 0.3,
                if r < c {
                    0.2
                } else if r > c {
                    -0.2
                } else {
                    0.0
                },
            )
        });
        let ops = qubit_dissipators(3, 5.0, 9.0).unwrap();
        let rho = ComplexMatrix::from_fn(3, 3, |r, c| {
            C64::new(1.0 / (1 + r + c) as f64, (r as f64 - c as f64) * 0.1)
        });
        let direct = &(&h.matmul(&rho) - &rho.matmul(&h)).scale(C64::new(0.0, -1.0))
            + &dissipate(&rho, &ops);
        let l = liouvillian(&h, &ops);
        let v = l.apply(&vectorize(&rho));
        let got = unvectorize(&v, 3).unwrap();
        assert!((&got - &direct).max_abs() < 1e-12);
    }

    #[test]
    fn unitary_superoperator_is_kron_conj() {
        let u = expm_skew_hermitian(&crate::operators::pauli::y(), 0.4).unwrap();
        let rho = qubit_rho(0.2, C64::new(0.1, -0.3));
        let lhs = vectorize(&u.matmul(&rho).matmul(&u.dagger()));
        let rhs = u.conj().kron(&u).apply(&vectorize(&rho));
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn kraus_identities() {
        let (t, t1, tphi) = (50.0, 15_000.0, 22_000.0);
        let m = kraus_channel(t, t1, tphi).unwrap();
        let sum = m.iter().fold(ComplexMatrix::zeros(2, 2), |acc, k| {
            &acc + &k.dagger().matmul(k)
        });
        assert!((&sum - &ComplexMatrix::identity(2)).max_abs() < 1e-15);
        assert_abs_diff_eq!(
            kraus_fidelity(&m),
            idling_fidelity(t, t1, tphi).0,
            epsilon = 1e-15
        );
        let z = kraus_channel(0.0, t1, tphi).unwrap();
        assert_eq!(z[0], ComplexMatrix::identity(2));
        assert_eq!(z[1].max_abs(), 0.0);
        assert_eq!(z[2].max_abs(), 0.0);
    }

    #[test]
    fn kraus_matches_lindblad() {
        let (t, t1, tphi) = (400.0, 900.0, 1300.0);
        let m = kraus_channel(t, t1, tphi).unwrap();
        let ops = qubit_dissipators(2, t1, tphi).unwrap();
        let h = ComplexMatrix::zeros(2, 2);
        for rho in [
            qubit_rho(1.0, ZERO),
            qubit_rho(0.5, C64::new(0.5, 0.0)),
            qubit_rho(0.3, C64::new(0.2, 0.3)),
        ] {
            let a = apply_kraus(&m, &rho);
            let b = lindblad_step(&rho, &h, &ops, t).unwrap();
            assert!((&a - &b).max_abs() < 1e-8, "{:?} vs {:?}", a, b);
        }
    }

    #[test]
    fn analytic_values() {
        assert_abs_diff_eq!(
            epsilon_t1(50.0, 15_000.0, f64::INFINITY),
            3.329e-3,
            epsilon = 5e-7
        );
        assert_abs_diff_eq!(
            idling_fidelity(1000.0, 20_000.0, 40_000.0).0,
            0.97561,
            epsilon = 5e-6
        );
        assert_eq!(epsilon_t1(0.0, 1.0, 1.0), 0.0);
        assert_eq!(epsilon_t1(123.0, f64::INFINITY, f64::INFINITY), 0.0);
        // Leading order t/T1 + t/T_phi.
        let (t, t1, tphi) = (1.0, 1e6, 2e6);
        assert_abs_diff_eq!(epsilon_t1(t, t1, tphi), t / t1 + t / tphi, epsilon = 1e-12);
    }

    fn short_schedule(p: &DeviceParams, hold: f64) -> PulseSchedule {
        PulseSchedule::new(p.idle, [ghz(6.0), ghz(6.35), ghz(6.0)], 0.0, 0.0, hold, 1.0).unwrap()
    }

    #[test]
    fn noise_off_matches_closed_system() {
        let p = DeviceParams::table1();
        let s = short_schedule(&p, 6.0);
        let integ = Integrator::unverified(0.01);
        let ps = evolve_superoperator(&p, &s, &NoiseParams::closed(), &integ, &logical_columns())
            .unwrap();
        let model = SystemModel::truncated(&p, 3).unwrap();
        let basis =
            LogicalBasis::from_dressed(&model, &DressedBasis::new(&model, &p.idle).unwrap())
                .unwrap();
        let u8 = project_sectors(
            &propagate_sectors(&model, &s, &integ, &[0, 1, 2, 3]).unwrap(),
            &basis,
        )
        .unwrap();
        for (k, &(i, j)) in ps.columns.iter().enumerate() {
            let expect = ComplexMatrix::from_fn(8, 8, |a, b| u8[(a, i)] * u8[(b, j)].conj());
            assert!((&ps.logical[k] - &expect).max_abs() < 1e-10);
        }
        let fo = open_fidelity(&ps, &u8, None).unwrap();
        let f = crate::gate_metrics::average_fidelity(&u8, &u8).unwrap();
        assert_abs_diff_eq!(fo.fidelity, f, epsilon = 1e-10);
    }

    #[test]
    fn zero_duration_is_identity() {
        let p = DeviceParams::table1();
        let s = PulseSchedule::new(p.idle, [ghz(6.0), ghz(6.35), ghz(6.0)], 0.0, 0.0, 0.0, 1e-9)
            .unwrap();
        let noise = NoiseParams::uniform_us(15.0, 20.0).unwrap();
        let ps = evolve_superoperator(
            &p,
            &s,
            &noise,
            &Integrator::unverified(0.01),
            &[(3, 5), (4, 4)],
        )
        .unwrap();
        for (k, &(i, j)) in ps.columns.iter().enumerate() {
            let m = &ps.logical[k];
            for a in 0..8 {
                for b in 0..8 {
                    let e = if (a, b) == (i, j) { 1.0 } else { 0.0 };
                    assert!((m[(a, b)] - C64::new(e, 0.0)).norm() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn restricted_matches_dense_lindblad() {
        // Dense oracle on the full 64-dim space with the generic step.
        let mut p = DeviceParams::table1();
        p.levels = 4;
        let s = short_schedule(&p, 1.0);
        let noise = NoiseParams::uniform_us(0.5, 0.8).unwrap();
        let steps = 120;
        let integ = Integrator::unverified(s.t_gate() / steps as f64);
        let ps = evolve_superoperator(&p, &s, &noise, &integ, &[(7, 7), (5, 2)]).unwrap();
        let model = SystemModel::truncated(&p, 3).unwrap();
        let basis =
            LogicalBasis::from_dressed(&model, &DressedBasis::new(&model, &p.idle).unwrap())
                .unwrap();
        let ops = chain_dissipators(&noise, 4).unwrap();
        let dt = s.t_gate() / steps as f64;
        let h0 = crate::device::build_hamiltonian(&p, &p.idle).unwrap();
        let frame = expm_skew_hermitian(&h0, -s.t_gate()).unwrap();
        for (k, &(i, j)) in [(7usize, 7usize), (5, 2)].iter().enumerate() {
            let vi = basis.full_vector(i);
            let vj = basis.full_vector(j);
            let mut rho = ComplexMatrix::from_fn(64, 64, |r, c| vi[r] * vj[c].conj());
            for n in 0..steps {
                let h =
                    crate::device::build_hamiltonian(&p, &s.frequencies_at((n as f64 + 0.5) * dt))
                        .unwrap();
                rho = lindblad_step(&rho, &h, &ops, dt).unwrap();
            }
            let rho = frame.matmul(&rho).matmul(&frame.dagger());
            let iso = basis.isometry();
            let m = iso.dagger().matmul(&rho).matmul(&iso);
            assert!(
                (&m - &ps.logical[k]).max_abs() < 1e-9,
                "{}",
                (&m - &ps.logical[k]).max_abs()
            );
        }
        assert!(ps.min_eigenvalue > -1e-8);
    }
}
