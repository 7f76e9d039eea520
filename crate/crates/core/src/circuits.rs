//! Three-qubit circuits over single-qubit rotations and `U_CXY(theta)`.
//!
//! Qubits are numbered 1..=3 with qubit 1 the most significant bit.
//! Rotations follow `[O]_theta = exp(-i theta O / 2)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{par_map, Execution};
use crate::gate_metrics::{apply_z_phases, ideal_ucxy, optimize_phases};
use crate::operators::{embed, pauli, ComplexMatrix, C64, ONE, ZERO};
use crate::optimize::{bfgs, nelder_mead, numeric_gradient};

pub const EQUIVALENCE_TOL: f64 = 1e-8;

/// Shipped fixture JSON files.
pub const FIXTURE_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn pauli(self) -> ComplexMatrix {
        match self {
            Axis::X => pauli::x(),
            Axis::Y => pauli::y(),
            Axis::Z => pauli::z(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum Gate {
    /// `[axis]_angle` on one qubit.
    Rotation {
        qubit: usize,
        axis: Axis,
        angle: f64,
    },
    /// `[Z]_a [Y]_b [Z]_c` (applied right to left), a general single-qubit gate.
    Local { qubit: usize, zyz: [f64; 3] },
    /// Free single-qubit slot, filled by the solver.
    Slot { qubit: usize },
    /// Controlled XY rotation: active when `control` is in |0>, swapping
    /// |01> and |10> of the other two qubits.
    Ucxy { theta: f64, control: usize },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Rotation { qubit, .. } | Gate::Local { qubit, .. } | Gate::Slot { qubit } => {
                vec![qubit]
            }
            Gate::Ucxy { .. } => vec![1, 2, 3],
        }
    }

    fn unitary(&self) -> Result<ComplexMatrix> {
        match *self {
            Gate::Rotation { qubit, axis, angle } => embed(&rotation(axis, angle), qubit - 1, 2),
            Gate::Local { qubit, zyz } => embed(&zyz_matrix(zyz), qubit - 1, 2),
            Gate::Slot { .. } => Err(Error::Structural("unfilled slot".into())),
            Gate::Ucxy { theta, control } => {
                let u = ideal_ucxy(theta);
                if control == 2 {
                    return Ok(u);
                }
                // Move the control onto qubit 2 by swapping it with the middle.
                let p = swap_qubits(control, 2);
                Ok(p.matmul(&u).matmul(&p))
            }
        }
    }
}

/// `exp(-i angle P / 2)`.
pub fn rotation(axis: Axis, angle: f64) -> ComplexMatrix {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let p = axis.pauli();
    ComplexMatrix::from_fn(2, 2, |r, k| {
        let id = if r == k { ONE } else { ZERO };
        id * c - C64::new(0.0, s) * p[(r, k)]
    })
}

fn zyz_matrix(a: [f64; 3]) -> ComplexMatrix {
    rotation(Axis::Z, a[0])
        .matmul(&rotation(Axis::Y, a[1]))
        .matmul(&rotation(Axis::Z, a[2]))
}

/// Permutation exchanging two qubits (1-based).
fn swap_qubits(a: usize, b: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(8, 8);
    for s in 0..8 {
        let bit = |q: usize| (s >> (3 - q)) & 1;
        let (ba, bb) = (bit(a), bit(b));
        let mut t = s & !(1 << (3 - a)) & !(1 << (3 - b));
        t |= bb << (3 - a);
        t |= ba << (3 - b);
        m[(t, s)] = ONE;
    }
    m
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub gates: Vec<Gate>,
}

/// Layers applied in order, first layer first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub layers: Vec<Layer>,
}

impl Circuit {
    pub fn new(layers: Vec<Vec<Gate>>) -> Self {
        Self {
            layers: layers.into_iter().map(|gates| Layer { gates }).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (k, layer) in self.layers.iter().enumerate() {
            let mut used = [false; 4];
            for g in &layer.gates {
                if let Gate::Ucxy { control, .. } = g {
                    if !(1..=3).contains(control) {
                        return Err(Error::Structural(format!(
                            "layer {k}: control {control} outside 1..=3"
                        )));
                    }
                }
                for q in g.qubits() {
                    if !(1..=3).contains(&q) {
                        return Err(Error::Structural(format!(
                            "layer {k}: qubit {q} outside 1..=3"
                        )));
                    }
                    if used[q] {
                        return Err(Error::Structural(format!(
                            "layer {k}: qubit {q} used twice"
                        )));
                    }
                    used[q] = true;
                }
            }
        }
        Ok(())
    }

    /// Concatenation: `self` first, then `other`.
    pub fn then(&self, other: &Circuit) -> Circuit {
        let mut layers = self.layers.clone();
        layers.extend(other.layers.iter().cloned());
        Circuit { layers }
    }

    pub fn slot_count(&self) -> usize {
        self.gates()
            .filter(|g| matches!(g, Gate::Slot { .. }))
            .count()
    }

    fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.layers.iter().flat_map(|l| l.gates.iter())
    }

    /// Fills the slots in order with `zyz` triples from `x`.
    pub fn fill_slots(&self, x: &[f64]) -> Result<Circuit> {
        if x.len() != 3 * self.slot_count() {
            return Err(Error::InvalidDimension(format!(
                "{} angles for {} slots",
                x.len(),
                self.slot_count()
            )));
        }
        let mut k = 0;
        let mut out = self.clone();
        for g in out.layers.iter_mut().flat_map(|l| l.gates.iter_mut()) {
            if let Gate::Slot { qubit } = *g {
                *g = Gate::Local {
                    qubit,
                    zyz: [x[k], x[k + 1], x[k + 2]],
                };
                k += 3;
            }
        }
        Ok(out)
    }
}

pub fn circuit_unitary(c: &Circuit) -> Result<ComplexMatrix> {
    c.validate()?;
    let mut u = ComplexMatrix::identity(8);
    for layer in &c.layers {
        for g in &layer.gates {
            match *g {
                Gate::Rotation { qubit, axis, angle } => {
                    left_apply(&mut u, qubit, &rotation(axis, angle))
                }
                Gate::Local { qubit, zyz } => left_apply(&mut u, qubit, &zyz_matrix(zyz)),
                _ => u = g.unitary()?.matmul(&u),
            }
        }
    }
    Ok(u)
}

/// `u <- (m on qubit) u` without forming the 8x8 embedding.
fn left_apply(u: &mut ComplexMatrix, qubit: usize, m: &ComplexMatrix) {
    let bit = 1 << (3 - qubit);
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    for r0 in (0..8).filter(|r| r & bit == 0) {
        let r1 = r0 | bit;
        for k in 0..8 {
            let (x, y) = (u[(r0, k)], u[(r1, k)]);
            u[(r0, k)] = a * x + b * y;
            u[(r1, k)] = c * x + d * y;
        }
    }
}

/// `(depth, count)`: layers and gates, empty layers not counted.
pub fn depth_count(c: &Circuit) -> (usize, usize) {
    let depth = c.layers.iter().filter(|l| !l.gates.is_empty()).count();
    (depth, c.gates().count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    /// `1 - |Tr(U^dag V)| / 8`.
    pub distance: f64,
    pub threshold: f64,
    /// `(post, pre)` Z phases when equivalence was taken modulo them.
    pub local_phases: Option<([f64; 3], [f64; 3])>,
}

pub fn distance(u: &ComplexMatrix, v: &ComplexMatrix) -> Result<f64> {
    if u.rows() != v.rows() || u.cols() != v.cols() || !u.is_square() {
        return Err(Error::InvalidDimension(format!(
            "cannot compare {}x{} with {}x{}",
            u.rows(),
            u.cols(),
            v.rows(),
            v.cols()
        )));
    }
    let tr: C64 = u
        .entries()
        .iter()
        .zip(v.entries())
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok((1.0 - tr.norm() / u.rows() as f64).max(0.0))
}

pub fn equivalent_up_to_global_phase(
    u: &ComplexMatrix,
    v: &ComplexMatrix,
    threshold: f64,
) -> Result<EquivalenceReport> {
    let d = distance(u, v)?;
    Ok(EquivalenceReport {
        equivalent: d < threshold,
        distance: d,
        threshold,
        local_phases: None,
    })
}

/// Equivalence of `u` to `target` after optimal pre/post Z phases on `u`.
pub fn equivalent_up_to_z_phases(
    u: &ComplexMatrix,
    target: &ComplexMatrix,
    threshold: f64,
) -> Result<EquivalenceReport> {
    let ph = optimize_phases(u, target)?;
    let d = distance(&apply_z_phases(u, &ph.post, &ph.pre), target)?;
    Ok(EquivalenceReport {
        equivalent: d < threshold,
        distance: d,
        threshold,
        local_phases: Some((ph.post, ph.pre)),
    })
}

/// `X_2 U X_2`: the middle qubit read with |0> and |1> exchanged, which
/// turns the native control-on-|0> into the usual control-on-|1>.
pub fn relabel_middle(u: &ComplexMatrix) -> ComplexMatrix {
    let x2 = embed(&pauli::x(), 1, 2).expect("2-level embedding");
    x2.matmul(u).matmul(&x2)
}

/// Named target gates, controlled on qubit 2 in |1> and acting on 1 and 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Target {
    /// Controls 1 and 2, target 3.
    Toffoli,
    Ccz,
    /// `exp(i theta X1 X3 / 4)` on the active branch.
    Cxx {
        theta: f64,
    },
    Cyy {
        theta: f64,
    },
    Czz {
        theta: f64,
    },
}

impl Target {
    pub fn unitary(&self) -> ComplexMatrix {
        let mut u = ComplexMatrix::identity(8);
        match *self {
            Target::Toffoli => {
                u[(6, 6)] = ZERO;
                u[(7, 7)] = ZERO;
                u[(6, 7)] = ONE;
                u[(7, 6)] = ONE;
                u
            }
            Target::Ccz => {
                u[(7, 7)] = -ONE;
                u
            }
            Target::Cxx { theta } => controlled_pair(Axis::X, theta),
            Target::Cyy { theta } => controlled_pair(Axis::Y, theta),
            Target::Czz { theta } => controlled_pair(Axis::Z, theta),
        }
    }
}

/// `|0><0|_2 (x) I + |1><1|_2 (x) exp(i theta P1 P3 / 4)`.
fn controlled_pair(axis: Axis, theta: f64) -> ComplexMatrix {
    let p = axis.pauli();
    let pp = p.kron(&pauli::id()).kron(&p);
    let (c, s) = ((theta / 4.0).cos(), (theta / 4.0).sin());
    let rot = ComplexMatrix::from_fn(8, 8, |r, k| {
        let id = if r == k { ONE } else { ZERO };
        id * c + C64::new(0.0, s) * pp[(r, k)]
    });
    ComplexMatrix::from_fn(8, 8, |r, k| {
        let active = (r >> 1) & 1 == 1 && (k >> 1) & 1 == 1;
        let idle = (r >> 1) & 1 == 0 && (k >> 1) & 1 == 0;
        if active {
            rot[(r, k)]
        } else if idle && r == k {
            ONE
        } else {
            ZERO
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub starts: usize,
    pub batch: usize,
    pub seed: u64,
    pub threshold: f64,
    pub execution: Execution,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            starts: 64,
            batch: 8,
            seed: 1,
            threshold: EQUIVALENCE_TOL,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dressing {
    pub circuit: Circuit,
    pub distance: f64,
    /// False when the multistart floor stayed above `1e-6`.
    pub solved: bool,
    pub starts_used: usize,
}

/// Fills the free slots of `skeleton` to make `frame(U)` match `target`,
/// where `frame` is the identity or [`relabel_middle`].
///
/// Multistart BFGS from seeded random angles, polished by Nelder-Mead;
/// stops after the first batch that reaches `threshold / 100`.
pub fn solve_local_dressing(
    skeleton: &Circuit,
    target: &ComplexMatrix,
    relabeled: bool,
    opts: &SolveOptions,
) -> Result<Dressing> {
    skeleton.validate()?;
    let n = 3 * skeleton.slot_count();
    let cost = |x: &[f64]| -> f64 {
        let Ok(c) = skeleton.fill_slots(x) else {
            return 1.0;
        };
        let Ok(u) = circuit_unitary(&c) else {
            return 1.0;
        };
        let u = if relabeled { relabel_middle(&u) } else { u };
        // 1 - |Tr|^2/64 is smooth where the distance is not, and about
        // twice the distance near a solution.
        let tr: C64 = u
            .entries()
            .iter()
            .zip(target.entries())
            .map(|(a, b)| a.conj() * b)
            .sum();
        1.0 - tr.norm_sqr() / 64.0
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut used = 0;
    let batch = opts.batch.max(1);
    while used < opts.starts {
        let idx: Vec<usize> = (used..(used + batch).min(opts.starts)).collect();
        used += idx.len();
        let runs = par_map(opts.execution, &idx, |&k| -> Result<(Vec<f64>, f64)> {
            let mut rng =
                ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(1_000_003).wrapping_add(k as u64));
            let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
            let grad = |x: &[f64]| numeric_gradient(&cost, x, 1e-7);
            let m = bfgs(cost, grad, &x0, 400)?;
            let m = nelder_mead(cost, &m.x, 1e-3, 2000)?;
            Ok((m.x, m.value))
        });
        for r in runs {
            let (x, v) = r?;
            if best.as_ref().is_none_or(|b| v < b.1) {
                best = Some((x, v));
            }
        }
        if best.as_ref().is_some_and(|b| b.1 < opts.threshold / 50.0) {
            break;
        }
    }
    let (x, _) = best.ok_or_else(|| Error::Validation("no solver starts requested".into()))?;
    let circuit = skeleton.fill_slots(&x)?;
    let u = circuit_unitary(&circuit)?;
    let d = distance(&if relabeled { relabel_middle(&u) } else { u }, target)?;
    Ok(Dressing {
        circuit,
        distance: d,
        solved: d <= 1e-6,
        starts_used: used,
    })
}

/// Slots on every qubit around and between `n` applications of `U_CXY(theta)`.
pub fn slotted_skeleton(theta: f64, n: usize) -> Circuit {
    let slots = || {
        (1..=3)
            .map(|qubit| Gate::Slot { qubit })
            .collect::<Vec<_>>()
    };
    let mut layers = vec![slots()];
    for _ in 0..n {
        layers.push(vec![Gate::Ucxy { theta, control: 2 }]);
        layers.push(slots());
    }
    Circuit::new(layers)
}

fn rot(qubit: usize, axis: Axis, angle: f64) -> Gate {
    Gate::Rotation { qubit, axis, angle }
}

/// `U_CXY(theta/2)`, `[P_1]_pi`, `U_CXY(theta/2)`, `[P_1]_pi` for P = X or Y.
pub fn controlled_pair_circuit(axis: Axis, theta: f64) -> Result<Circuit> {
    if axis == Axis::Z {
        return czz_circuit(theta);
    }
    let u = Gate::Ucxy {
        theta: theta / 2.0,
        control: 2,
    };
    // Flipping the sign of the other Pauli between the two halves leaves
    // only the P1 P3 term.
    let flip = match axis {
        Axis::X => Axis::X,
        _ => Axis::Y,
    };
    Ok(Circuit::new(vec![
        vec![u.clone()],
        vec![rot(1, flip, PI)],
        vec![u],
        vec![rot(1, flip, PI)],
    ]))
}

/// CYY conjugated by `[X]_{pi/2}` on qubits 1 and 3.
pub fn czz_circuit(theta: f64) -> Result<Circuit> {
    let pre = Circuit::new(vec![vec![
        rot(1, Axis::X, PI / 2.0),
        rot(3, Axis::X, PI / 2.0),
    ]]);
    let post = Circuit::new(vec![vec![
        rot(1, Axis::X, -PI / 2.0),
        rot(3, Axis::X, -PI / 2.0),
    ]]);
    Ok(pre
        .then(&controlled_pair_circuit(Axis::Y, theta)?)
        .then(&post))
}

/// Toffoli conjugated on its target by `[Y]_{+-pi/2}`.
pub fn ccz_from_toffoli(toffoli: &Circuit) -> Circuit {
    Circuit::new(vec![vec![rot(3, Axis::Y, PI / 2.0)]])
        .then(toffoli)
        .then(&Circuit::new(vec![vec![rot(3, Axis::Y, -PI / 2.0)]]))
}

/// A stored decomposition, re-verified from its angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub description: String,
    pub target: Target,
    /// Compare in the relabeled middle-qubit frame.
    pub relabeled: bool,
    pub circuit: Circuit,
    pub distance: f64,
    pub depth: usize,
    pub count: usize,
}

impl Fixture {
    pub fn new(name: &str, description: &str, target: Target, circuit: Circuit) -> Result<Self> {
        let mut f = Self {
            name: name.into(),
            description: description.into(),
            target,
            relabeled: true,
            circuit,
            distance: 1.0,
            depth: 0,
            count: 0,
        };
        f.distance = f.verify(EQUIVALENCE_TOL)?.distance;
        (f.depth, f.count) = depth_count(&f.circuit);
        Ok(f)
    }

    pub fn verify(&self, threshold: f64) -> Result<EquivalenceReport> {
        let u = circuit_unitary(&self.circuit)?;
        let u = if self.relabeled {
            relabel_middle(&u)
        } else {
            u
        };
        equivalent_up_to_global_phase(&u, &self.target.unitary(), threshold)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Angles used for the controlled-pair fixtures.
pub const PAIR_ANGLES: [(&str, f64); 3] = [("pi_7", PI / 7.0), ("pi_3", PI / 3.0), ("pi", PI)];

/// Solves and builds the full fixture set.
///
/// Toffoli dressings come from [`solve_local_dressing`] on
/// [`slotted_skeleton`]; the rest are exact constructions.
pub fn standard_fixtures(opts: &SolveOptions) -> Result<Vec<Fixture>> {
    let mut out = Vec::new();
    let toffoli = Target::Toffoli.unitary();
    let mut ciswap_toffoli = None;
    for (name, theta, what) in [
        ("toffoli_ciswap", PI, "two U_CXY(pi)"),
        ("toffoli_sqrt_ciswap", PI / 2.0, "two U_CXY(pi/2)"),
    ] {
        // An unsolved dressing is kept with its floor distance, which the
        // fixture then reports on verification.
        let d = solve_local_dressing(&slotted_skeleton(theta, 2), &toffoli, true, opts)?;
        if !d.solved {
            log::warn!("{name}: solver floor {:.3e}", d.distance);
        }
        let f = Fixture::new(
            name,
            &format!("Toffoli from {what} and single-qubit gates"),
            Target::Toffoli,
            d.circuit,
        )?;
        if ciswap_toffoli.is_none() {
            ciswap_toffoli = Some(f.circuit.clone());
        }
        out.push(f);
    }
    let base = ciswap_toffoli.expect("solved above");
    out.push(Fixture::new(
        "ccz_ciswap",
        "CCZ from the C-iSWAP Toffoli and two rotations on qubit 3",
        Target::Ccz,
        ccz_from_toffoli(&base),
    )?);
    for (tag, theta) in PAIR_ANGLES {
        for (axis, target, label) in [
            (Axis::X, Target::Cxx { theta }, "cxx"),
            (Axis::Y, Target::Cyy { theta }, "cyy"),
            (Axis::Z, Target::Czz { theta }, "czz"),
        ] {
            out.push(Fixture::new(
                &format!("{label}_{tag}"),
                &format!("{} from two U_CXY(theta/2)", label.to_uppercase()),
                target,
                controlled_pair_circuit(axis, theta)?,
            )?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gate_metrics::ideal_ciswap;
    use proptest::prelude::*;

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        (a - b).max_abs() < tol
    }

    #[test]
    fn empty_and_primitive() {
        let empty = Circuit::default();
        assert_eq!(circuit_unitary(&empty).unwrap(), ComplexMatrix::identity(8));
        assert_eq!(depth_count(&empty), (0, 0));
        let x = Circuit::new(vec![vec![rot(1, Axis::X, PI)]]);
        let expect = pauli::x()
            .kron(&pauli::id())
            .kron(&pauli::id())
            .scale(C64::new(0.0, -1.0));
        assert!(close(&circuit_unitary(&x).unwrap(), &expect, 1e-15));
        let u = Circuit::new(vec![vec![Gate::Ucxy {
            theta: PI,
            control: 2,
        }]]);
        assert!(close(&circuit_unitary(&u).unwrap(), &ideal_ciswap(), 1e-15));
        let two = Circuit::new(vec![
            vec![Gate::Ucxy {
                theta: 1.0,
                control: 2,
            }],
            vec![Gate::Ucxy {
                theta: 2.0,
                control: 2,
            }],
        ]);
        assert_eq!(depth_count(&two), (2, 2));
    }

    #[test]
    fn overlapping_layer_rejected() {
        let c = Circuit::new(vec![vec![
            rot(1, Axis::X, 1.0),
            Gate::Ucxy {
                theta: 1.0,
                control: 2,
            },
        ]]);
        assert!(matches!(circuit_unitary(&c), Err(Error::Structural(_))));
        let c = Circuit::new(vec![vec![rot(4, Axis::X, 1.0)]]);
        assert!(matches!(c.validate(), Err(Error::Structural(_))));
    }

    #[test]
    fn equivalence_basics() {
        let u = Target::Toffoli.unitary();
        let v = u.scale(C64::from_polar(1.0, 0.7));
        assert!(
            equivalent_up_to_global_phase(&u, &v, EQUIVALENCE_TOL)
                .unwrap()
                .equivalent
        );
        let x1 = embed(&pauli::x(), 0, 2).unwrap();
        let r = equivalent_up_to_global_phase(&ComplexMatrix::identity(8), &x1, EQUIVALENCE_TOL)
            .unwrap();
        assert!(!r.equivalent);
        assert!((r.distance - 1.0).abs() < 1e-15);
        assert!(distance(&ComplexMatrix::identity(8), &ComplexMatrix::identity(4)).is_err());
    }

    #[test]
    fn z_phase_equivalence() {
        let t = ideal_ciswap();
        let u = apply_z_phases(&t, &[0.1, -0.2, 0.3], &[0.05, 0.0, -0.1]);
        assert!(
            !equivalent_up_to_global_phase(&u, &t, EQUIVALENCE_TOL)
                .unwrap()
                .equivalent
        );
        assert!(
            equivalent_up_to_z_phases(&u, &t, EQUIVALENCE_TOL)
                .unwrap()
                .equivalent
        );
    }

    #[test]
    fn control_wiring() {
        // Control on qubit 1 swaps 001 and 010.
        let u = Gate::Ucxy {
            theta: PI,
            control: 1,
        }
        .unitary()
        .unwrap();
        assert_eq!(u[(2, 1)], C64::new(0.0, 1.0));
        assert_eq!(u[(5, 5)], ONE);
    }

    #[test]
    fn pair_constructions() {
        for (_, theta) in PAIR_ANGLES.iter().chain(&[("x", PI / 5.0), ("y", -1.3)]) {
            for (axis, target) in [
                (Axis::X, Target::Cxx { theta: *theta }),
                (Axis::Y, Target::Cyy { theta: *theta }),
                (Axis::Z, Target::Czz { theta: *theta }),
            ] {
                let f = Fixture::new(
                    "t",
                    "",
                    target,
                    controlled_pair_circuit(axis, *theta).unwrap(),
                )
                .unwrap();
                assert!(
                    f.distance < EQUIVALENCE_TOL,
                    "{axis:?} {theta}: {}",
                    f.distance
                );
                match axis {
                    Axis::Z => assert!(f.count - 4 <= 5),
                    _ => assert!(f.depth <= 4 && f.count <= 4),
                }
            }
        }
    }

    #[test]
    fn native_frame_has_inverted_control() {
        let c = controlled_pair_circuit(Axis::X, PI).unwrap();
        let u = circuit_unitary(&c).unwrap();
        let t = Target::Cxx { theta: PI }.unitary();
        assert!(distance(&u, &t).unwrap() > 0.1);
        assert!(distance(&relabel_middle(&u), &t).unwrap() < 1e-12);
    }

    #[test]
    fn solver_finds_cxx_dressing() {
        let theta = PI / 5.0;
        let skel = Circuit::new(vec![
            vec![Gate::Ucxy {
                theta: theta / 2.0,
                control: 2,
            }],
            vec![Gate::Slot { qubit: 1 }, Gate::Slot { qubit: 3 }],
            vec![Gate::Ucxy {
                theta: theta / 2.0,
                control: 2,
            }],
            vec![Gate::Slot { qubit: 1 }, Gate::Slot { qubit: 3 }],
        ]);
        let opts = SolveOptions {
            starts: 32,
            ..SolveOptions::default()
        };
        let d = solve_local_dressing(&skel, &Target::Cxx { theta }.unitary(), true, &opts).unwrap();
        assert!(d.distance < 1e-8, "{}", d.distance);
        assert!(d.solved);
    }

    #[test]
    fn unsolvable_is_reported() {
        // One U_CXY(pi/7) cannot produce a Toffoli.
        let opts = SolveOptions {
            starts: 4,
            batch: 4,
            ..SolveOptions::default()
        };
        let d = solve_local_dressing(
            &slotted_skeleton(PI / 7.0, 1),
            &Target::Toffoli.unitary(),
            true,
            &opts,
        )
        .unwrap();
        assert!(!d.solved);
        assert_eq!(d.starts_used, 4);
    }

    #[test]
    fn fixture_roundtrip() {
        let f = Fixture::new(
            "cxx",
            "",
            Target::Cxx { theta: 0.4 },
            controlled_pair_circuit(Axis::X, 0.4).unwrap(),
        )
        .unwrap();
        let g = Fixture::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(f, g);
    }

    proptest! {
        #[test]
        fn concatenation_multiplies(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64) {
            let c1 = Circuit::new(vec![vec![rot(1, Axis::Y, a), rot(3, Axis::Z, b)], vec![Gate::Ucxy { theta: c, control: 2 }]]);
            let c2 = Circuit::new(vec![vec![rot(2, Axis::X, b)], vec![Gate::Ucxy { theta: a, control: 2 }]]);
            let lhs = circuit_unitary(&c1.then(&c2)).unwrap();
            let rhs = circuit_unitary(&c2).unwrap().matmul(&circuit_unitary(&c1).unwrap());
            prop_assert!(close(&lhs, &rhs, 1e-12));
        }

        #[test]
        fn pair_rotation_inverts(theta in -6.0..6.0f64) {
            for axis in [Axis::X, Axis::Y, Axis::Z] {
                let f = circuit_unitary(&controlled_pair_circuit(axis, theta).unwrap()).unwrap();
                let b = circuit_unitary(&controlled_pair_circuit(axis, -theta).unwrap()).unwrap();
                let prod = relabel_middle(&b).matmul(&relabel_middle(&f));
                prop_assert!(distance(&prod, &ComplexMatrix::identity(8)).unwrap() < 1e-10);
            }
        }
    }
}
