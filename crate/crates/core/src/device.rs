//! Full-system Hamiltonian of the three-oscillator chain, its dressed
//! eigenbasis, and exact-diagonalization estimates of effective couplings.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{annihilation, eigh, embed, ComplexMatrix, FockLabel, C64, ZERO};
use crate::units::{ghz, mhz};

/// Static parameters of the chain Q1 - Q2 - Q3. All frequencies angular (rad/ns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Bare frequencies at the idle point.
    pub idle: [f64; 3],
    pub anharmonicity: [f64; 3],
    /// `[g1, g3]`: Q1-Q2 and Q3-Q2 couplings.
    pub coupling: [f64; 2],
    /// Levels kept per oscillator.
    pub levels: usize,
}

pub const DEFAULT_LEVELS: usize = 4;

impl DeviceParams {
    pub fn new(
        idle: [f64; 3],
        anharmonicity: [f64; 3],
        coupling: [f64; 2],
        levels: usize,
    ) -> Result<Self> {
        let p = Self {
            idle,
            anharmonicity,
            coupling,
            levels,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::InvalidDimension(format!(
                "levels per oscillator must be >= 2, got {}",
                self.levels
            )));
        }
        if self.coupling.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::Validation(format!(
                "couplings must be finite and non-negative, got {:?}",
                self.coupling
            )));
        }
        let finite = self
            .idle
            .iter()
            .chain(&self.anharmonicity)
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::Validation(
                "non-finite frequency or anharmonicity".into(),
            ));
        }
        Ok(())
    }

    /// Parameters of the reference C-iSWAP device: transmon - CSFQ - transmon,
    /// alpha/2pi = (-350, +350, -350) MHz, idle (5.15, 6.35, 5.30) GHz,
    /// g/2pi = 45 MHz, four levels each.
    pub fn table1() -> Self {
        Self {
            idle: [ghz(5.15), ghz(6.35), ghz(5.30)],
            anharmonicity: [mhz(-350.0), mhz(350.0), mhz(-350.0)],
            coupling: [mhz(45.0), mhz(45.0)],
            levels: DEFAULT_LEVELS,
        }
    }

    pub fn dim(&self) -> usize {
        self.levels.pow(3)
    }

    /// `Delta_j = omega_j - omega_2` for j = 1, 3.
    pub fn detunings(freqs: &[f64; 3]) -> [f64; 2] {
        [freqs[0] - freqs[1], freqs[2] - freqs[1]]
    }

    /// `|Delta_j / g_j|`; infinite for an uncoupled pair.
    pub fn dispersive_ratios(&self, freqs: &[f64; 3]) -> [f64; 2] {
        let d = Self::detunings(freqs);
        [0, 1].map(|j| {
            if self.coupling[j] == 0.0 {
                f64::INFINITY
            } else {
                (d[j] / self.coupling[j]).abs()
            }
        })
    }

    pub fn with_coupling(&self, g: [f64; 2]) -> Self {
        Self {
            coupling: g,
            ..self.clone()
        }
    }
}

/// `H = sum_l [w_l n_l + a_l/2 n_l(n_l-1)] + sum_j g_j (q_j^+ q_2 + q_j q_2^+)`
/// on the full `d^3` space, qubit 1 leftmost.
pub fn build_hamiltonian(p: &DeviceParams, freqs: &[f64; 3]) -> Result<ComplexMatrix> {
    p.validate()?;
    if freqs.iter().any(|f| !f.is_finite()) {
        return Err(Error::Validation(format!(
            "non-finite frequencies {freqs:?}"
        )));
    }
    let d = p.levels;
    let a = annihilation(d)?;
    let n = a.dagger().matmul(&a);
    let id = ComplexMatrix::identity(d);
    let kerr = ComplexMatrix::from_fn(d, d, |r, c| {
        if r == c {
            let k = r as f64;
            C64::new(k * (k - 1.0), 0.0)
        } else {
            ZERO
        }
    });
    let mut h = ComplexMatrix::zeros(d.pow(3), d.pow(3));
    for l in 0..3 {
        let single = &n.scale_real(freqs[l]) + &kerr.scale_real(p.anharmonicity[l] / 2.0);
        h = &h + &embed(&single, l, d)?;
    }
    let q2 = embed(&a, 1, d)?;
    for (j, site) in [0usize, 2].into_iter().enumerate() {
        let qj = embed(&a, site, d)?;
        let hop = qj.dagger().matmul(&q2);
        h = &h + &(&hop + &hop.dagger()).scale_real(p.coupling[j]);
    }
    let _ = id;
    Ok(h)
}

/// Fixed-excitation-number sector of the Hamiltonian.
///
/// `H` conserves `N = n1 + n2 + n3`, so each sector evolves independently.
#[derive(Debug, Clone)]
pub struct ExcitationBlock {
    pub excitations: usize,
    pub labels: Vec<FockLabel>,
    /// Flat indices into the `d^3` space.
    pub indices: Vec<usize>,
    /// Coupling and Kerr part; frequencies are added per call.
    static_part: ComplexMatrix,
    occupations: Vec<[f64; 3]>,
}

impl ExcitationBlock {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn hamiltonian(&self, freqs: &[f64; 3]) -> ComplexMatrix {
        let mut h = self.static_part.clone();
        self.add_frequencies(&mut h, freqs);
        h
    }

    /// Writes `static + sum_l w_l n_l` into `out`, reusing its allocation.
    pub fn hamiltonian_into(&self, freqs: &[f64; 3], out: &mut ComplexMatrix) {
        out.entries_mut()
            .copy_from_slice(self.static_part.entries());
        self.add_frequencies(out, freqs);
    }

    fn add_frequencies(&self, h: &mut ComplexMatrix, freqs: &[f64; 3]) {
        for (k, occ) in self.occupations.iter().enumerate() {
            h[(k, k)].re += occ[0] * freqs[0] + occ[1] * freqs[1] + occ[2] * freqs[2];
        }
    }

    pub fn position(&self, label: &FockLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn occupation(&self, k: usize) -> [f64; 3] {
        self.occupations[k]
    }
}

/// Block-diagonal view of the chain Hamiltonian, optionally truncated to
/// sectors with at most `max_excitation` quanta.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub params: DeviceParams,
    pub blocks: Vec<ExcitationBlock>,
}

impl SystemModel {
    pub fn new(p: &DeviceParams) -> Result<Self> {
        Self::truncated(p, 3 * (p.levels - 1))
    }

    pub fn truncated(p: &DeviceParams, max_excitation: usize) -> Result<Self> {
        p.validate()?;
        let d = p.levels;
        let mut blocks = Vec::new();
        for exc in 0..=max_excitation.min(3 * (d - 1)) {
            let labels: Vec<FockLabel> = FockLabel::all(d)
                .filter(|l| l.excitations() == exc)
                .collect();
            let indices: Vec<usize> = labels.iter().map(|l| l.index(d)).collect();
            let dim = labels.len();
            let mut static_part = ComplexMatrix::zeros(dim, dim);
            let occupations: Vec<[f64; 3]> = labels.iter().map(|l| l.0.map(|n| n as f64)).collect();
            for (k, occ) in occupations.iter().enumerate() {
                let kerr: f64 = (0..3)
                    .map(|s| p.anharmonicity[s] / 2.0 * occ[s] * (occ[s] - 1.0))
                    .sum();
                static_part[(k, k)] = C64::new(kerr, 0.0);
            }
            // g_j (q_j^+ q_2 + h.c.): moves one quantum between site j and site 2.
            for (col, label) in labels.iter().enumerate() {
                for (j, site) in [(0usize, 0usize), (1, 2)] {
                    let g = p.coupling[j];
                    if g == 0.0 {
                        continue;
                    }
                    let [n_s, n_2] = [label.0[site], label.0[1]];
                    // q_j^+ q_2
                    if n_2 > 0 && n_s + 1 < d {
                        let mut out = *label;
                        out.0[1] -= 1;
                        out.0[site] += 1;
                        let row = labels.iter().position(|l| *l == out).expect("same sector");
                        static_part[(row, col)] +=
                            C64::new(g * ((n_2 * (n_s + 1)) as f64).sqrt(), 0.0);
                    }
                    // q_j q_2^+
                    if n_s > 0 && n_2 + 1 < d {
                        let mut out = *label;
                        out.0[site] -= 1;
                        out.0[1] += 1;
                        let row = labels.iter().position(|l| *l == out).expect("same sector");
                        static_part[(row, col)] +=
                            C64::new(g * ((n_s * (n_2 + 1)) as f64).sqrt(), 0.0);
                    }
                }
            }
            blocks.push(ExcitationBlock {
                excitations: exc,
                labels,
                indices,
                static_part,
                occupations,
            });
        }
        Ok(Self {
            params: p.clone(),
            blocks,
        })
    }

    pub fn levels(&self) -> usize {
        self.params.levels
    }

    pub fn block_of(&self, label: &FockLabel) -> Option<(usize, usize)> {
        let b = label.excitations();
        let block = self.blocks.get(b)?;
        block.position(label).map(|k| (b, k))
    }

    /// Total number of states kept by the model.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }
}

/// A dressed eigenstate tied to the bare label it is adiabatically connected to.
#[derive(Debug, Clone)]
pub struct DressedState {
    pub label: FockLabel,
    pub block: usize,
    pub energy: f64,
    /// `|<bare|dressed>|^2`.
    pub overlap: f64,
    /// Amplitudes on the block's bare labels, gauge-fixed so that the
    /// amplitude on `label` is real and positive.
    pub amplitudes: Vec<C64>,
}

#[derive(Debug, Clone)]
struct Assignment {
    state: DressedState,
    problem: Option<String>,
}

/// Eigenbasis of the model at fixed frequencies, labeled by maximal overlap.
#[derive(Debug, Clone)]
pub struct DressedBasis {
    pub levels: usize,
    /// Per block: ascending eigenvalues and column eigenvectors.
    pub eigen: Vec<(Vec<f64>, ComplexMatrix)>,
    assignments: HashMap<FockLabel, Assignment>,
}

/// Ties in overlap below this are treated as ambiguous.
const TIE_TOL: f64 = 1e-12;

impl DressedBasis {
    pub fn new(model: &SystemModel, freqs: &[f64; 3]) -> Result<Self> {
        let mut eigen = Vec::with_capacity(model.blocks.len());
        let mut assignments = HashMap::new();
        for (b, block) in model.blocks.iter().enumerate() {
            let e = eigh(&block.hamiltonian(freqs))?;
            let n = block.dim();
            let overlap = |label: usize, vec: usize| e.vectors[(label, vec)].norm_sqr();
            let mut pairs: Vec<(f64, usize, usize)> = (0..n)
                .flat_map(|l| (0..n).map(move |v| (l, v)))
                .map(|(l, v)| (overlap(l, v), l, v))
                .collect();
            pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
            let mut label_taken = vec![false; n];
            let mut vec_taken = vec![false; n];
            for (idx, &(o, l, v)) in pairs.iter().enumerate() {
                if label_taken[l] || vec_taken[v] {
                    continue;
                }
                let tie = pairs[idx + 1..]
                    .iter()
                    .take_while(|p| o - p.0 < TIE_TOL)
                    .any(|&(_, l2, v2)| {
                        (l2 == l && !vec_taken[v2]) || (v2 == v && !label_taken[l2])
                    });
                label_taken[l] = true;
                vec_taken[v] = true;
                let phase = e.vectors[(l, v)];
                let gauge = if phase.norm() > 0.0 {
                    phase.conj() / phase.norm()
                } else {
                    C64::new(1.0, 0.0)
                };
                let amplitudes: Vec<C64> = (0..n).map(|r| e.vectors[(r, v)] * gauge).collect();
                let label = block.labels[l];
                let problem = if tie {
                    Some(format!("degenerate overlaps for |{label}>"))
                } else if o <= 0.5 {
                    Some(format!(
                        "best overlap for |{label}> is {o:.3} <= 0.5 (hybridized)"
                    ))
                } else {
                    None
                };
                assignments.insert(
                    label,
                    Assignment {
                        state: DressedState {
                            label,
                            block: b,
                            energy: e.values[v],
                            overlap: o,
                            amplitudes,
                        },
                        problem,
                    },
                );
            }
            eigen.push((e.values, e.vectors));
        }
        Ok(Self {
            levels: model.levels(),
            eigen,
            assignments,
        })
    }

    pub fn state(&self, label: &FockLabel) -> Result<&DressedState> {
        let a = self
            .assignments
            .get(label)
            .ok_or_else(|| Error::BasisIllDefined(format!("|{label}> is outside the model")))?;
        match &a.problem {
            Some(p) => Err(Error::BasisIllDefined(p.clone())),
            None => Ok(&a.state),
        }
    }

    /// Like [`Self::state`] but returns hybridized states too.
    pub fn state_unchecked(&self, label: &FockLabel) -> Option<&DressedState> {
        self.assignments.get(label).map(|a| &a.state)
    }
}

/// Idle-point eigenstates `|~ijk>` for the eight computational labels.
#[derive(Debug, Clone)]
pub struct LogicalBasis {
    pub levels: usize,
    /// In binary order `000 .. 111`.
    pub states: Vec<DressedState>,
    /// Block indices for each state, as flat `d^3` indices.
    block_indices: Vec<Vec<usize>>,
}

impl LogicalBasis {
    pub fn from_dressed(model: &SystemModel, basis: &DressedBasis) -> Result<Self> {
        let states: Vec<DressedState> = FockLabel::computational()
            .iter()
            .map(|l| basis.state(l).cloned())
            .collect::<Result<_>>()?;
        let block_indices = model.blocks.iter().map(|b| b.indices.clone()).collect();
        Ok(Self {
            levels: model.levels(),
            states,
            block_indices,
        })
    }

    pub fn overlaps(&self) -> [f64; 8] {
        std::array::from_fn(|k| self.states[k].overlap)
    }

    pub fn energies(&self) -> [f64; 8] {
        std::array::from_fn(|k| self.states[k].energy)
    }

    /// Logical state `k` as a vector in the full `d^3` space.
    pub fn full_vector(&self, k: usize) -> Vec<C64> {
        let s = &self.states[k];
        let mut v = vec![ZERO; self.levels.pow(3)];
        for (amp, &idx) in s.amplitudes.iter().zip(&self.block_indices[s.block]) {
            v[idx] = *amp;
        }
        v
    }

    /// `d^3 x 8` isometry whose columns are the logical states.
    pub fn isometry(&self) -> ComplexMatrix {
        let n = self.levels.pow(3);
        let cols: Vec<Vec<C64>> = (0..8).map(|k| self.full_vector(k)).collect();
        ComplexMatrix::from_fn(n, 8, |r, c| cols[c][r])
    }

    /// Greedy-injective assignment always holds; kept as an explicit check.
    pub fn is_injective(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.states
            .iter()
            .all(|s| seen.insert((s.block, s.energy.to_bits())))
    }
}

/// Idle-point logical basis. Warns when the idle point is barely dispersive.
pub fn logical_basis(p: &DeviceParams, idle: &[f64; 3]) -> Result<LogicalBasis> {
    let ratios = p.dispersive_ratios(idle);
    if ratios.iter().any(|r| *r < 5.0) {
        log::warn!("idle point is weakly dispersive: |Delta/g| = {ratios:?}");
    }
    let model = SystemModel::truncated(p, 3)?;
    let basis = DressedBasis::new(&model, idle)?;
    LogicalBasis::from_dressed(&model, &basis)
}

/// Exchange couplings read off exact-diagonalization splittings (rad/ns).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericCouplings {
    /// `{|100>, |001>}` pair, Q2 in |0>.
    pub j1_ground: f64,
    /// `{|110>, |011>}` pair, Q2 in |1>.
    pub j1_excited: f64,
    /// `{|101>, |002>}` at `w1 = w3 + a3`.
    pub j2_ground_i: f64,
    /// `{|101>, |200>}` at `w3 = w1 + a1`.
    pub j2_ground_ii: f64,
    /// `{|111>, |012>}` at `w1 = w3 + a3`.
    pub j2_excited_i: f64,
    /// `{|111>, |210>}` at `w3 = w1 + a1`.
    pub j2_excited_ii: f64,
}

/// Signed effective coupling between bare states `a` and `b` of one sector.
///
/// Half the splitting of the two eigenstates carrying most of the weight of
/// `span{a, b}`. With `refine`, Q1's frequency is scanned (golden section)
/// for the minimum gap, which removes residual dressed detuning. The sign is
/// that of the off-diagonal element in the bare-phase gauge.
pub fn pair_coupling(
    model: &SystemModel,
    freqs: &[f64; 3],
    a: FockLabel,
    b: FockLabel,
    refine: bool,
) -> Result<f64> {
    let (blk, ia) = model
        .block_of(&a)
        .ok_or_else(|| Error::Validation(format!("|{a}> outside model")))?;
    let (blk_b, ib) = model
        .block_of(&b)
        .ok_or_else(|| Error::Validation(format!("|{b}> outside model")))?;
    if blk != blk_b {
        return Err(Error::Validation(format!(
            "|{a}> and |{b}> are in different excitation sectors"
        )));
    }
    let block = &model.blocks[blk];
    let gap_at = |f: &[f64; 3]| -> Result<(f64, f64)> {
        let e = eigh(&block.hamiltonian(f))?;
        let n = block.dim();
        let mut weights: Vec<(f64, usize)> = (0..n)
            .map(|v| {
                (
                    e.vectors[(ia, v)].norm_sqr() + e.vectors[(ib, v)].norm_sqr(),
                    v,
                )
            })
            .collect();
        weights.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
        let (w0, v0) = weights[0];
        let (w1, v1) = weights[1];
        if w0 <= 0.5 || w1 <= 0.5 {
            return Err(Error::BasisIllDefined(format!(
                "pair |{a}>,|{b}> not spectrally isolated (weights {w0:.3}, {w1:.3})"
            )));
        }
        let (lo, hi) = if e.values[v0] < e.values[v1] {
            (v0, v1)
        } else {
            (v1, v0)
        };
        let half_gap = (e.values[hi] - e.values[lo]) / 2.0;
        let corr = (e.vectors[(ia, lo)].conj() * e.vectors[(ib, lo)]).re;
        Ok((half_gap, if corr > 0.0 { -1.0 } else { 1.0 }))
    };
    if !refine {
        let (j, sign) = gap_at(freqs)?;
        return Ok(sign * j);
    }
    let g = model.params.coupling[0].max(model.params.coupling[1]);
    let det = DeviceParams::detunings(freqs);
    let scale = det
        .iter()
        .map(|x| x.abs())
        .fold(f64::INFINITY, f64::min)
        .max(g);
    let window = 4.0 * g * g / scale + 1e-9;
    let gap = |x: f64| -> Result<f64> {
        let mut f = *freqs;
        f[0] += x;
        gap_at(&f).map(|(j, _)| j)
    };
    let x = golden_section_min(-window, window, 1e-13, |x| gap(x).unwrap_or(f64::INFINITY));
    let mut f = *freqs;
    f[0] += x;
    let (j, sign) = gap_at(&f)?;
    Ok(sign * j)
}

/// Minimizes a unimodal function on `[lo, hi]`.
pub(crate) fn golden_section_min(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    f: impl Fn(f64) -> f64,
) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (hi - lo).abs() < tol {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Exact-diagonalization couplings at an interaction point with `w1 = w3`.
///
/// Each J2 pair is first moved onto its own resonance by retuning Q1
/// (`w1 = w3 + a3` for the `|002>` pair, `w1 = w3 - a1` for the `|200>`
/// pair). Every pair is then refined to its anticrossing, so an uncoupled
/// pair reports zero rather than its dispersive detuning.
pub fn extract_couplings_numeric(p: &DeviceParams, freqs: &[f64; 3]) -> Result<NumericCouplings> {
    let model = SystemModel::truncated(p, 3)?;
    let l = FockLabel::new;
    let tol = 1e-9 * freqs[1].abs().max(1.0);
    if (freqs[0] - freqs[2]).abs() > tol {
        log::warn!("extract_couplings_numeric: outer qubits are not resonant");
    }
    if p.levels < 3 {
        return Err(Error::InvalidDimension(
            "J1 with Q2 excited needs >= 3 levels".into(),
        ));
    }
    let j1_ground = pair_coupling(&model, freqs, l(1, 0, 0), l(0, 0, 1), true)?;
    let j1_excited = pair_coupling(&model, freqs, l(1, 1, 0), l(0, 1, 1), true)?;
    let [a1, _, a3] = p.anharmonicity;
    let f_i = [freqs[2] + a3, freqs[1], freqs[2]];
    let f_ii = [freqs[2] - a1, freqs[1], freqs[2]];
    let j2_ground_i = pair_coupling(&model, &f_i, l(1, 0, 1), l(0, 0, 2), true)?;
    let j2_ground_ii = pair_coupling(&model, &f_ii, l(1, 0, 1), l(2, 0, 0), true)?;
    let j2_excited_i = pair_coupling(&model, &f_i, l(1, 1, 1), l(0, 1, 2), true)?;
    let j2_excited_ii = pair_coupling(&model, &f_ii, l(1, 1, 1), l(2, 1, 0), true)?;
    Ok(NumericCouplings {
        j1_ground,
        j1_excited,
        j2_ground_i,
        j2_ground_ii,
        j2_excited_i,
        j2_excited_ii,
    })
}
