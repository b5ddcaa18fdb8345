//! Three-level state vectors, density matrices and operators.
//!
//! The basis is always ordered `(|+1⟩, |0⟩, |−1⟩)`: index 0 is the initial
//! polarized level, index 1 the intermediate level shared by both
//! transitions, index 2 the transfer target.

use std::ops::{Add, Index, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

/// Dense 3×3 complex matrix, row-major.
pub type Mat3 = [[C64; 3]; 3];

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

const NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const EIGEN_FLOOR: f64 = -1e-10;
const UNITARY_TOL: f64 = 1e-9;

/// Basis level labels in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    Plus1 = 0,
    Zero = 1,
    Minus1 = 2,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Plus1, Level::Zero, Level::Minus1];

    pub fn index(self) -> usize {
        self as usize
    }
}

// ---------------------------------------------------------------------------
// small dense kernels

#[inline]
pub(crate) fn mat_zero() -> Mat3 {
    [[ZERO; 3]; 3]
}

#[inline]
pub(crate) fn mat_identity() -> Mat3 {
    let mut m = mat_zero();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = ONE;
    }
    m
}

#[inline]
pub(crate) fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = mat_zero();
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

#[inline]
pub(crate) fn mat_adjoint(a: &Mat3) -> Mat3 {
    let mut c = mat_zero();
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[j][i].conj();
        }
    }
    c
}

#[inline]
pub(crate) fn mat_scale(a: &Mat3, s: C64) -> Mat3 {
    let mut c = *a;
    for row in c.iter_mut() {
        for x in row.iter_mut() {
            *x *= s;
        }
    }
    c
}

#[inline]
pub(crate) fn mat_add(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = *a;
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] += b[i][j];
        }
    }
    c
}

#[inline]
pub(crate) fn mat_sub(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = *a;
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] -= b[i][j];
        }
    }
    c
}

#[inline]
pub(crate) fn mat_vec(a: &Mat3, v: &[C64; 3]) -> [C64; 3] {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

pub(crate) fn frobenius(a: &Mat3) -> f64 {
    a.iter()
        .flat_map(|row| row.iter())
        .map(|x| x.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn max_abs(a: &Mat3) -> f64 {
    a.iter()
        .flat_map(|row| row.iter())
        .map(|x| x.norm())
        .fold(0.0, f64::max)
}

fn hermitian_defect(a: &Mat3) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in i..3 {
            worst = worst.max((a[i][j] - a[j][i].conj()).norm());
        }
    }
    worst
}

/// ‖U†U − I‖_F
pub(crate) fn unitarity_defect(u: &Mat3) -> f64 {
    frobenius(&mat_sub(&mat_mul(&mat_adjoint(u), u), &mat_identity()))
}

/// `exp(−i·h·dt)` for Hermitian `h` by scaling and squaring of the Taylor
/// series. Terms are summed until they fall below f64 resolution, so the
/// result is unitary to rounding error.
pub(crate) fn expm_i(h: &Mat3, dt: f64) -> Mat3 {
    // Largest norms for which the degree-8 and degree-12 Taylor remainders
    // stay below 1e-16.
    const THETA_8: f64 = 0.069;
    const THETA_12: f64 = 0.333;
    let mut a = mat_scale(h, C64::new(0.0, -dt));
    // |re| + |im| bounds the modulus, so this over-estimates the norm.
    let norm = a
        .iter()
        .map(|row| row.iter().map(|x| x.re.abs() + x.im.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if norm <= THETA_8 {
        return taylor_8(&a);
    }
    let mut squarings = 0u32;
    if norm > THETA_12 {
        squarings = (norm / THETA_12).log2().ceil() as u32;
        a = mat_scale(&a, C64::new(0.5f64.powi(squarings as i32), 0.0));
    }
    let mut sum = taylor_12(&a);
    for _ in 0..squarings {
        sum = mat_mul(&sum, &sum);
    }
    sum
}

/// `Σ c_k P_k` over matching powers.
#[inline]
fn combine(coeffs: &[f64], powers: &[&Mat3]) -> Mat3 {
    let mut out = mat_zero();
    for (&c, p) in coeffs.iter().zip(powers) {
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] += p[i][j] * c;
            }
        }
    }
    out
}

const INV_FACT: [f64; 13] = [
    1.0,
    1.0,
    1.0 / 2.0,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5040.0,
    1.0 / 40320.0,
    1.0 / 362880.0,
    1.0 / 3628800.0,
    1.0 / 39916800.0,
    1.0 / 479001600.0,
];

/// Degree-8 Taylor polynomial by Paterson–Stockmeyer in `A³`.
#[inline]
fn taylor_8(a: &Mat3) -> Mat3 {
    let i = mat_identity();
    let a2 = mat_mul(a, a);
    let a3 = mat_mul(&a2, a);
    let f = &INV_FACT;
    let b0 = combine(&f[0..3], &[&i, a, &a2]);
    let b1 = combine(&f[3..6], &[&i, a, &a2]);
    let b2 = combine(&f[6..9], &[&i, a, &a2]);
    mat_add(&b0, &mat_mul(&a3, &mat_add(&b1, &mat_mul(&a3, &b2))))
}

/// Degree-12 Taylor polynomial by Paterson–Stockmeyer in `A⁴`.
#[inline]
fn taylor_12(a: &Mat3) -> Mat3 {
    let i = mat_identity();
    let a2 = mat_mul(a, a);
    let a3 = mat_mul(&a2, a);
    let a4 = mat_mul(&a2, &a2);
    let f = &INV_FACT;
    let b0 = combine(&f[0..4], &[&i, a, &a2, &a3]);
    let b1 = combine(&f[4..8], &[&i, a, &a2, &a3]);
    let b2 = combine(&f[8..13], &[&i, a, &a2, &a3, &a4]);
    mat_add(&b0, &mat_mul(&a4, &mat_add(&b1, &mat_mul(&a4, &b2))))
}

/// Eigen-decomposition of a Hermitian 3×3 matrix by cyclic complex Jacobi
/// rotations. Returns ascending eigenvalues and the matrix whose columns are
/// the matching orthonormal eigenvectors.
pub fn hermitian_eigen(m: &Mat3) -> ([f64; 3], Mat3) {
    let mut a = *m;
    let mut v = mat_identity();
    let scale = frobenius(&a).max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let off: f64 = (a[0][1].norm_sqr() + a[0][2].norm_sqr() + a[1][2].norm_sqr()).sqrt();
        if off <= 1e-17 * scale {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let z = a[p][q];
            let mag = z.norm();
            if mag <= 1e-300 {
                continue;
            }
            let phase = z / mag;
            let app = a[p][p].re;
            let aqq = a[q][q].re;
            let theta = (aqq - app) / (2.0 * mag);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // J = D·R with D = diag(1, e^{-iφ}) on (p, q) and a real rotation R
            let mut j = mat_identity();
            j[p][p] = C64::new(c, 0.0);
            j[p][q] = C64::new(s, 0.0);
            j[q][p] = -phase.conj() * s;
            j[q][q] = phase.conj() * c;
            a = mat_mul(&mat_adjoint(&j), &mat_mul(&a, &j));
            a[p][q] = ZERO;
            a[q][p] = ZERO;
            v = mat_mul(&v, &j);
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&x, &y| a[x][x].re.total_cmp(&a[y][y].re));
    let mut vals = [0.0; 3];
    let mut vecs = mat_zero();
    for (k, &src) in order.iter().enumerate() {
        vals[k] = a[src][src].re;
        for row in 0..3 {
            vecs[row][k] = v[row][src];
        }
    }
    (vals, vecs)
}

// ---------------------------------------------------------------------------
// StateVector

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amplitudes: [C64; 3],
}

impl StateVector {
    /// Builds a state from amplitudes `(c₊₁, c₀, c₋₁)`; the norm must be 1.
    pub fn new(amplitudes: [C64; 3]) -> Result<Self> {
        if amplitudes.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("state amplitude".into()));
        }
        let s = StateVector { amplitudes };
        let dev = (s.norm_sqr() - 1.0).abs();
        if dev > NORM_TOL {
            return Err(invalid(format!("state norm deviates from 1 by {dev:.3e}")));
        }
        Ok(s)
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(amplitudes: [C64; 3]) -> Result<Self> {
        let n = amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(invalid("cannot normalize a zero or non-finite state"));
        }
        Ok(StateVector {
            amplitudes: amplitudes.map(|c| c / n),
        })
    }

    pub fn basis(level: Level) -> Self {
        let mut amplitudes = [ZERO; 3];
        amplitudes[level.index()] = ONE;
        StateVector { amplitudes }
    }

    pub(crate) fn from_raw(amplitudes: [C64; 3]) -> Self {
        StateVector { amplitudes }
    }

    pub fn amplitudes(&self) -> [C64; 3] {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn populations(&self) -> [f64; 3] {
        self.amplitudes.map(|c| c.norm_sqr())
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn outer(&self) -> DensityMatrix {
        let mut m = mat_zero();
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = self.amplitudes[i] * self.amplitudes[j].conj();
            }
        }
        DensityMatrix { entries: m }
    }
}

impl Index<Level> for StateVector {
    type Output = C64;

    fn index(&self, level: Level) -> &C64 {
        &self.amplitudes[level.index()]
    }
}

// ---------------------------------------------------------------------------
// DensityMatrix

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    entries: Mat3,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity (eigenvalue floor −1e−10).
    pub fn new(entries: Mat3) -> Result<Self> {
        if entries
            .iter()
            .flat_map(|r| r.iter())
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::NonFinite("density matrix entry".into()));
        }
        let herm = hermitian_defect(&entries);
        if herm > HERMITIAN_TOL {
            return Err(invalid(format!("density matrix not Hermitian (defect {herm:.3e})")));
        }
        let tr: f64 = (0..3).map(|i| entries[i][i].re).sum();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(invalid(format!("density matrix trace is {tr}, expected 1")));
        }
        let (vals, _) = hermitian_eigen(&entries);
        if vals[0] < EIGEN_FLOOR {
            return Err(invalid(format!(
                "density matrix has negative eigenvalue {:.3e}",
                vals[0]
            )));
        }
        Ok(DensityMatrix { entries })
    }

    /// Incoherent mixture of the three basis levels.
    pub fn diagonal(populations: [f64; 3]) -> Result<Self> {
        if populations.iter().any(|&p| p < 0.0) {
            return Err(invalid("populations must be nonnegative"));
        }
        let mut m = mat_zero();
        for (i, p) in populations.iter().enumerate() {
            m[i][i] = C64::new(*p, 0.0);
        }
        DensityMatrix::new(m)
    }

    pub fn pure(state: &StateVector) -> Self {
        state.outer()
    }

    pub fn entries(&self) -> &Mat3 {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..3).map(|i| self.entries[i][i].re).sum()
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.entries[0][0].re, self.entries[1][1].re, self.entries[2][2].re]
    }

    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.entries)
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        hermitian_eigen(&self.entries).0
    }

    /// Convex combination `w·self + (1−w)·other`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(invalid("mixing weight must lie in [0, 1]"));
        }
        let a = mat_scale(&self.entries, C64::new(w, 0.0));
        let b = mat_scale(&other.entries, C64::new(1.0 - w, 0.0));
        Ok(DensityMatrix {
            entries: mat_add(&a, &b),
        })
    }
}

// ---------------------------------------------------------------------------
// Operator

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    /// H/ħ, entries in rad/s.
    Hamiltonian,
    /// Unitary evolution operator.
    Propagator,
    General,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Operator {
    entries: Mat3,
    kind: OperatorKind,
}

impl Operator {
    pub fn identity() -> Self {
        Operator {
            entries: mat_identity(),
            kind: OperatorKind::Propagator,
        }
    }

    pub fn hamiltonian(entries: Mat3) -> Result<Self> {
        let scale = max_abs(&entries).max(1.0);
        let defect = hermitian_defect(&entries);
        if defect > HERMITIAN_TOL * scale {
            return Err(invalid(format!("Hamiltonian not Hermitian (defect {defect:.3e})")));
        }
        Ok(Operator {
            entries,
            kind: OperatorKind::Hamiltonian,
        })
    }

    pub fn propagator(entries: Mat3) -> Result<Self> {
        let defect = unitarity_defect(&entries);
        if !(defect <= UNITARY_TOL) {
            return Err(Error::ContractViolation(format!(
                "operator is not unitary: ‖U†U − I‖_F = {defect:.3e}"
            )));
        }
        Ok(Operator {
            entries,
            kind: OperatorKind::Propagator,
        })
    }

    pub fn general(entries: Mat3) -> Self {
        Operator {
            entries,
            kind: OperatorKind::General,
        }
    }

    /// Diagonal phase operator `diag(e^{iα₀}, e^{iα₁}, e^{iα₂})`.
    pub fn phases(angles: [f64; 3]) -> Self {
        let mut m = mat_zero();
        for (i, a) in angles.iter().enumerate() {
            m[i][i] = C64::from_polar(1.0, *a);
        }
        Operator {
            entries: m,
            kind: OperatorKind::Propagator,
        }
    }

    pub(crate) fn from_raw_propagator(entries: Mat3) -> Self {
        Operator {
            entries,
            kind: OperatorKind::Propagator,
        }
    }

    pub(crate) fn from_raw_hamiltonian(entries: Mat3) -> Self {
        Operator {
            entries,
            kind: OperatorKind::Hamiltonian,
        }
    }

    pub fn entries(&self) -> &Mat3 {
        &self.entries
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn adjoint(&self) -> Self {
        Operator {
            entries: mat_adjoint(&self.entries),
            kind: self.kind,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.entries)
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.entries)
    }

    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.entries)
    }

    /// Ascending eigenvalues of a Hermitian operator.
    pub fn eigenvalues(&self) -> Result<[f64; 3]> {
        if self.kind != OperatorKind::Hamiltonian {
            return Err(Error::ContractViolation(
                "eigenvalues requested for a non-Hamiltonian operator".into(),
            ));
        }
        Ok(hermitian_eigen(&self.entries).0)
    }

    /// `exp(−i·H·dt)` for a Hamiltonian.
    pub fn evolution(&self, dt: f64) -> Result<Self> {
        if self.kind != OperatorKind::Hamiltonian {
            return Err(Error::ContractViolation(
                "only a Hamiltonian can generate an evolution operator".into(),
            ));
        }
        Ok(Operator::from_raw_propagator(expm_i(&self.entries, dt)))
    }

    /// Matrix–vector product on raw amplitudes.
    pub fn act(&self, v: &[C64; 3]) -> [C64; 3] {
        mat_vec(&self.entries, v)
    }
}

impl Mul for Operator {
    type Output = Operator;

    fn mul(self, rhs: Operator) -> Operator {
        let kind = if self.kind == OperatorKind::Propagator && rhs.kind == OperatorKind::Propagator {
            OperatorKind::Propagator
        } else {
            OperatorKind::General
        };
        Operator {
            entries: mat_mul(&self.entries, &rhs.entries),
            kind,
        }
    }
}

impl Add for Operator {
    type Output = Operator;

    fn add(self, rhs: Operator) -> Operator {
        let kind = if self.kind == OperatorKind::Hamiltonian && rhs.kind == OperatorKind::Hamiltonian {
            OperatorKind::Hamiltonian
        } else {
            OperatorKind::General
        };
        Operator {
            entries: mat_add(&self.entries, &rhs.entries),
            kind,
        }
    }
}

impl Sub for Operator {
    type Output = Operator;

    fn sub(self, rhs: Operator) -> Operator {
        let kind = if self.kind == OperatorKind::Hamiltonian && rhs.kind == OperatorKind::Hamiltonian {
            OperatorKind::Hamiltonian
        } else {
            OperatorKind::General
        };
        Operator {
            entries: mat_sub(&self.entries, &rhs.entries),
            kind,
        }
    }
}

fn require_propagator(op: &Operator) -> Result<()> {
    if op.kind != OperatorKind::Propagator {
        return Err(Error::ContractViolation(format!(
            "expected a propagator, got {:?}",
            op.kind
        )));
    }
    Ok(())
}

/// `U·ψ` for a propagator `U`.
pub fn apply(op: &Operator, s: &StateVector) -> Result<StateVector> {
    require_propagator(op)?;
    Ok(StateVector::from_raw(op.act(&s.amplitudes)))
}

/// `U·ρ·U†` for a propagator `U`.
pub fn conjugate_evolve(op: &Operator, rho: &DensityMatrix) -> Result<DensityMatrix> {
    require_propagator(op)?;
    let m = mat_mul(&op.entries, &mat_mul(&rho.entries, &mat_adjoint(&op.entries)));
    Ok(DensityMatrix { entries: m })
}
