//! Dense complex linear algebra and bosonic operators for truncated
//! anharmonic oscillators.
//!
//! Everything here is small (at most 64x64 in Hilbert space), so storage is
//! a plain row-major `Vec`. The Hermitian eigensolver is delegated to
//! `nalgebra`; the rest is written out directly.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    /// Builds from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidDimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let m = rows[0].len();
        Self::from_fn(n, m, |r, c| C64::new(rows[r][c], 0.0))
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (k, v) in values.iter().enumerate() {
            m[(k, k)] = *v;
        }
        m
    }

    pub fn real_diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (k, v) in values.iter().enumerate() {
            m[(k, k)] = C64::new(*v, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn entries_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|k| self[(k, k)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `self * other`, panicking on shape mismatch.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        let n = other.cols;
        for r in 0..self.rows {
            let out_row = &mut out.data[r * n..(r + 1) * n];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other^dagger` without forming the adjoint.
    pub fn matmul_adjoint(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols, "matmul_adjoint shape mismatch");
        Self::from_fn(self.rows, other.rows, |r, c| {
            self.row(r)
                .iter()
                .zip(other.row(c))
                .map(|(a, b)| a * b.conj())
                .sum()
        })
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "apply shape mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    /// Kronecker product with `self` as the most-significant factor.
    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        Self::from_fn(rows, cols, |r, c| {
            self[(r / other.rows, c / other.cols)] * other[(r % other.rows, c % other.cols)]
        })
    }

    /// Principal submatrix on the given index set.
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        Self::from_fn(indices.len(), indices.len(), |r, c| {
            self[(indices[r], indices[c])]
        })
    }

    /// Largest |H - H^dagger| entry relative to the largest entry of H.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let scale = self.max_abs().max(1.0);
        let mut worst = 0.0_f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst / scale
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// `max |U^dagger U - I|` entry.
    pub fn unitarity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let g = self.dagger().matmul(self);
        let mut worst = 0.0_f64;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let target = if r == c { ONE } else { ZERO };
                worst = worst.max((g[(r, c)] - target).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Occupation numbers `(n1, n2, n3)` of the three oscillators.
///
/// Qubit 1 is the most significant factor: `index = n1*d^2 + n2*d + n3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FockLabel(pub [usize; 3]);

impl FockLabel {
    pub fn new(n1: usize, n2: usize, n3: usize) -> Self {
        Self([n1, n2, n3])
    }

    pub fn index(&self, d: usize) -> usize {
        let [a, b, c] = self.0;
        debug_assert!(a < d && b < d && c < d);
        a * d * d + b * d + c
    }

    pub fn from_index(index: usize, d: usize) -> Self {
        Self([index / (d * d), (index / d) % d, index % d])
    }

    pub fn excitations(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn is_computational(&self) -> bool {
        self.0.iter().all(|&n| n < 2)
    }

    /// Computational labels in binary order `000, 001, ..., 111`.
    pub fn computational() -> [FockLabel; 8] {
        std::array::from_fn(|k| FockLabel::new((k >> 2) & 1, (k >> 1) & 1, k & 1))
    }

    /// Position of a computational label in the 8-dim logical ordering.
    pub fn logical_index(&self) -> Option<usize> {
        self.is_computational()
            .then(|| self.0[0] * 4 + self.0[1] * 2 + self.0[2])
    }

    pub fn all(d: usize) -> impl Iterator<Item = FockLabel> {
        (0..d * d * d).map(move |k| FockLabel::from_index(k, d))
    }
}

impl fmt::Display for FockLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.0[0], self.0[1], self.0[2])
    }
}

impl std::str::FromStr for FockLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let digits: Vec<usize> = s
            .trim()
            .chars()
            .map(|c| c.to_digit(10).map(|d| d as usize))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Config(format!("bad Fock label '{s}'")))?;
        match digits.as_slice() {
            [a, b, c] => Ok(FockLabel::new(*a, *b, *c)),
            _ => Err(Error::Config(format!(
                "Fock label '{s}' needs three digits"
            ))),
        }
    }
}

/// Truncated annihilation operator `a|n> = sqrt(n)|n-1>`.
pub fn annihilation(d: usize) -> Result<ComplexMatrix> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!(
            "oscillator needs at least 2 levels, got {d}"
        )));
    }
    let mut a = ComplexMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(a)
}

pub fn number(d: usize) -> Result<ComplexMatrix> {
    let a = annihilation(d)?;
    Ok(a.dagger().matmul(&a))
}

/// `A (x) B (x) C` with qubit 1 leftmost.
pub fn kron3(a: &ComplexMatrix, b: &ComplexMatrix, c: &ComplexMatrix) -> Result<ComplexMatrix> {
    for (name, m) in [("A", a), ("B", b), ("C", c)] {
        if !m.is_square() {
            return Err(Error::InvalidDimension(format!(
                "kron3 factor {name} is {}x{}",
                m.rows(),
                m.cols()
            )));
        }
    }
    Ok(a.kron(b).kron(c))
}

/// Embeds a single-oscillator operator on site `site` (0-based).
pub fn embed(op: &ComplexMatrix, site: usize, d: usize) -> Result<ComplexMatrix> {
    let id = ComplexMatrix::identity(d);
    match site {
        0 => kron3(op, &id, &id),
        1 => kron3(&id, op, &id),
        2 => kron3(&id, &id, op),
        _ => Err(Error::InvalidDimension(format!("site {site} out of range"))),
    }
}

/// Default relative tolerance for the Hermiticity precondition.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Eigh {
    /// Ascending.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: ComplexMatrix,
}

pub fn eigh(h: &ComplexMatrix) -> Result<Eigh> {
    if !h.is_square() {
        return Err(Error::InvalidDimension(format!(
            "eigh needs a square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let defect = h.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian {
            deviation: defect,
            tol: HERMITIAN_TOL,
        });
    }
    let n = h.rows();
    if n == 1 {
        return Ok(Eigh {
            values: vec![h[(0, 0)].re],
            vectors: ComplexMatrix::identity(1),
        });
    }
    // Symmetrize so the solver sees an exactly Hermitian input.
    let sym = ComplexMatrix::from_fn(n, n, |r, c| 0.5 * (h[(r, c)] + h[(c, r)].conj()));
    let decomposition = SymmetricEigen::try_new(sym.to_nalgebra(), f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalFailure("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        decomposition.eigenvalues[a]
            .partial_cmp(&decomposition.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order
        .iter()
        .map(|&k| decomposition.eigenvalues[k])
        .collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| decomposition.eigenvectors[(r, order[c])]);
    Ok(Eigh { values, vectors })
}

impl Eigh {
    /// `V f(Lambda) V^dagger` for a complex-valued spectral function.
    pub fn spectral_map(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let n = self.values.len();
        let fv: Vec<C64> = self.values.iter().map(|&x| f(x)).collect();
        let v = &self.vectors;
        let scaled = ComplexMatrix::from_fn(n, n, |r, c| v[(r, c)] * fv[c]);
        scaled.matmul_adjoint(v)
    }
}

/// `exp(-i H t)` for Hermitian `H`, via eigendecomposition.
pub fn expm_skew_hermitian(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let e = eigh(h)?;
    Ok(e.spectral_map(|x| C64::from_polar(1.0, -x * t)))
}

/// Pauli matrices with `Z = diag(1, -1)`.
pub mod pauli {
    use super::*;

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    pub fn y() -> ComplexMatrix {
        ComplexMatrix::from_row_major(2, 2, vec![ZERO, -I, I, ZERO]).unwrap()
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    pub fn id() -> ComplexMatrix {
        ComplexMatrix::identity(2)
    }
}
