//! Complex 2x2 / 4x4 unitary algebra: rotation constructors, projective
//! (phase-insensitive) equality, Bell-pair overlaps, Haar sampling on SU(2)
//! and the closure of the single-qubit Clifford group.
//!
//! All protocol-level gate comparisons go through [`phase_equal`]; the gate
//! identities the protocols rely on hold only up to a global phase, while
//! Pauli arithmetic (see [`crate::pauli`]) stays exact.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Entrywise tolerance for projective matrix equality.
pub const TOL_EQ: f64 = 1e-10;
/// Tolerance for the unitarity check on construction.
pub const TOL_UNITARY: f64 = 1e-12;

pub(crate) const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A 2x2 complex matrix verified unitary on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary2(Matrix2<C64>);

/// A 4x4 complex matrix verified unitary on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary4(Matrix4<C64>);

fn unitarity_deviation_2(m: &Matrix2<C64>) -> f64 {
    let prod = m.adjoint() * m;
    let mut dev: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let expected = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
            dev = dev.max((prod[(i, j)] - expected).norm());
        }
    }
    dev
}

fn unitarity_deviation_4(m: &Matrix4<C64>) -> f64 {
    let prod = m.adjoint() * m;
    let mut dev: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let expected = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
            dev = dev.max((prod[(i, j)] - expected).norm());
        }
    }
    dev
}

impl Unitary2 {
    /// Checked constructor; rejects matrices with `|U†U - 1| > 1e-12`.
    pub fn new(m: Matrix2<C64>) -> Result<Self> {
        let dev = unitarity_deviation_2(&m);
        if dev > TOL_UNITARY {
            return Err(Error::NotUnitary { deviation: dev });
        }
        Ok(Unitary2(m))
    }

    /// For matrices unitary by construction (gate constants, products).
    pub(crate) fn from_exact(m: Matrix2<C64>) -> Self {
        debug_assert!(unitarity_deviation_2(&m) < 1e-9);
        Unitary2(m)
    }

    /// Snap a near-unitary product back onto the group (Gram-Schmidt on the
    /// columns). Long adaptive-retry chains drift by a few ulps per factor.
    pub(crate) fn renormalized(m: Matrix2<C64>) -> Self {
        let mut c0 = m.column(0).into_owned();
        c0 /= C64::new(c0.norm(), 0.0);
        let mut c1 = m.column(1).into_owned();
        let overlap = c0.dotc(&c1);
        c1 -= c0.map(|x| x * overlap);
        c1 /= C64::new(c1.norm(), 0.0);
        Unitary2(Matrix2::from_columns(&[c0, c1]))
    }

    pub fn identity() -> Self {
        Unitary2(Matrix2::identity())
    }

    pub fn pauli_x() -> Self {
        Unitary2(Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)))
    }

    pub fn pauli_y() -> Self {
        Unitary2(Matrix2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)))
    }

    pub fn pauli_z() -> Self {
        Unitary2(Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)))
    }

    pub fn hadamard() -> Self {
        let s = FRAC_1_SQRT_2;
        Unitary2(Matrix2::new(c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)))
    }

    /// sqrt(Z) = diag(1, i), the S gate of the Clifford generators.
    pub fn sqrt_z() -> Self {
        Unitary2(Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)))
    }

    /// diag(1, e^{i phi}), a phase gate. Equals `z_rotation(phi)` up to phase.
    pub fn phase_gate(phi: f64) -> Self {
        Unitary2(Matrix2::new(
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            C64::from_polar(1.0, phi),
        ))
    }

    pub fn as_matrix(&self) -> &Matrix2<C64> {
        &self.0
    }

    pub fn mul(&self, rhs: &Unitary2) -> Unitary2 {
        Unitary2(self.0 * rhs.0)
    }

    pub fn adjoint(&self) -> Unitary2 {
        Unitary2(self.0.adjoint())
    }

    pub fn determinant(&self) -> C64 {
        self.0.determinant()
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Multiply by a unit-magnitude scalar. Keeps unitarity.
    pub fn scale_phase(&self, phase: C64) -> Unitary2 {
        debug_assert!((phase.norm() - 1.0).abs() < 1e-9);
        Unitary2(self.0.map(|e| e * phase))
    }

    pub fn phase_equal(&self, other: &Unitary2) -> bool {
        phase_equal_static(&self.0, &other.0)
    }

    /// Tensor product `self (x) rhs`, with `self` on the high bit.
    pub fn kron(&self, rhs: &Unitary2) -> Unitary4 {
        Unitary4(self.0.kronecker(&rhs.0))
    }
}

impl Unitary4 {
    pub fn new(m: Matrix4<C64>) -> Result<Self> {
        let dev = unitarity_deviation_4(&m);
        if dev > TOL_UNITARY {
            return Err(Error::NotUnitary { deviation: dev });
        }
        Ok(Unitary4(m))
    }

    pub fn identity() -> Self {
        Unitary4(Matrix4::identity())
    }

    /// Controlled-Z in the basis |q1 q2> with q1 on the high bit.
    pub fn cz() -> Self {
        let mut m = Matrix4::identity();
        m[(3, 3)] = c(-1.0, 0.0);
        Unitary4(m)
    }

    /// Controlled-phase(phi): |11> picks up e^{i phi}. cz() is phi = pi.
    pub fn controlled_phase(phi: f64) -> Self {
        let mut m = Matrix4::identity();
        m[(3, 3)] = C64::from_polar(1.0, phi);
        Unitary4(m)
    }

    pub fn cnot() -> Self {
        let mut m = Matrix4::zeros();
        m[(0, 0)] = c(1.0, 0.0);
        m[(1, 1)] = c(1.0, 0.0);
        m[(2, 3)] = c(1.0, 0.0);
        m[(3, 2)] = c(1.0, 0.0);
        Unitary4(m)
    }

    pub fn as_matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    pub fn mul(&self, rhs: &Unitary4) -> Unitary4 {
        Unitary4(self.0 * rhs.0)
    }

    pub fn adjoint(&self) -> Unitary4 {
        Unitary4(self.0.adjoint())
    }

    pub fn determinant(&self) -> C64 {
        self.0.determinant()
    }

    pub fn phase_equal(&self, other: &Unitary4) -> bool {
        phase_equal_static(&self.0, &other.0)
    }

    /// The spread two-qubit operation W† (1 (x) u) W.
    pub fn sandwich(w: &Unitary4, u: &Unitary2) -> Unitary4 {
        let mid = Unitary2::identity().kron(u);
        w.adjoint().mul(&mid).mul(w)
    }
}

fn phase_equal_static<D: nalgebra::Dim, S>(a: &nalgebra::Matrix<C64, D, D, S>, b: &nalgebra::Matrix<C64, D, D, S>) -> bool
where
    S: nalgebra::storage::Storage<C64, D, D>,
{
    // Anchor the relative phase on the largest entry of b.
    let mut best = (0usize, 0usize);
    let mut best_norm = 0.0;
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            let n = b[(i, j)].norm();
            if n > best_norm {
                best_norm = n;
                best = (i, j);
            }
        }
    }
    if best_norm < TOL_EQ {
        return false;
    }
    let phase = a[best] / b[best];
    if (phase.norm() - 1.0).abs() > TOL_EQ {
        return false;
    }
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if (a[(i, j)] - phase * b[(i, j)]).norm() > TOL_EQ {
                return false;
            }
        }
    }
    true
}

/// True iff a = c·b for some unit scalar c, entrywise within 1e-10.
/// Both arguments must be square and of the same dimension.
pub fn phase_equal_dyn(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Result<bool> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            left: a.nrows(),
            right: b.nrows(),
        });
    }
    Ok(phase_equal_static(a, b))
}

/// Projective equality for fixed-size matrices (same dimension by type).
pub fn phase_equal<D: nalgebra::Dim, S>(a: &nalgebra::Matrix<C64, D, D, S>, b: &nalgebra::Matrix<C64, D, D, S>) -> bool
where
    S: nalgebra::storage::Storage<C64, D, D>,
{
    phase_equal_static(a, b)
}

/// If `a = c·b` with |c| = 1, returns c (anchored on b's largest entry).
pub fn relative_phase<D: nalgebra::Dim, S>(
    a: &nalgebra::Matrix<C64, D, D, S>,
    b: &nalgebra::Matrix<C64, D, D, S>,
) -> Option<C64>
where
    S: nalgebra::storage::Storage<C64, D, D>,
{
    if !phase_equal_static(a, b) {
        return None;
    }
    let mut best = (0usize, 0usize);
    let mut best_norm = 0.0;
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            let n = b[(i, j)].norm();
            if n > best_norm {
                best_norm = n;
                best = (i, j);
            }
        }
    }
    Some(a[best] / b[best])
}

/// exp(i theta Z / 2) = diag(e^{i theta/2}, e^{-i theta/2}).
pub fn z_rotation(theta: f64) -> Result<Unitary2> {
    if !theta.is_finite() {
        return Err(Error::NonFiniteAngle);
    }
    Ok(Unitary2(Matrix2::new(
        C64::from_polar(1.0, theta / 2.0),
        c(0.0, 0.0),
        c(0.0, 0.0),
        C64::from_polar(1.0, -theta / 2.0),
    )))
}

/// exp(i theta X / 2) = cos(theta/2)·1 + i sin(theta/2)·X.
pub fn x_rotation(theta: f64) -> Result<Unitary2> {
    if !theta.is_finite() {
        return Err(Error::NonFiniteAngle);
    }
    let (s, co) = (theta / 2.0).sin_cos();
    Ok(Unitary2(Matrix2::new(
        c(co, 0.0),
        c(0.0, s),
        c(0.0, s),
        c(co, 0.0),
    )))
}

/// The overlap <Phi_v1 | Phi_v2> = tr(v1† v2) / 2 between the entangled
/// resource states made from v1 and v2.
pub fn overlap_phi(v1: &Unitary2, v2: &Unitary2) -> C64 {
    (v1.0.adjoint() * v2.0).trace() * C64::new(0.5, 0.0)
}

/// Haar-random element of SU(2): a uniformly random point on S^3 gives the
/// first column, the second is forced by det = 1.
pub fn haar_su2<R: Rng + ?Sized>(rng: &mut R) -> Unitary2 {
    loop {
        let mut comps = [0.0f64; 4];
        for v in comps.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let norm = comps.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        let a = c(comps[0] / norm, comps[1] / norm);
        let b = c(comps[2] / norm, comps[3] / norm);
        return Unitary2(Matrix2::new(a, -b.conj(), b, a.conj()));
    }
}

/// Closure of <H, sqrt(Z)> modulo global phase: the 24 phase classes of the
/// single-qubit Clifford group, in a deterministic breadth-first order.
pub fn clifford_group_1q() -> Vec<Unitary2> {
    let generators = [Unitary2::hadamard(), Unitary2::sqrt_z()];
    let mut classes: Vec<Unitary2> = vec![Unitary2::identity()];
    let mut frontier: Vec<Unitary2> = vec![Unitary2::identity()];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for elem in &frontier {
            for g in &generators {
                let prod = g.mul(elem);
                if !classes.iter().any(|k| k.phase_equal(&prod)) {
                    classes.push(prod.clone());
                    next.push(prod);
                }
            }
        }
        frontier = next;
    }
    classes
}
