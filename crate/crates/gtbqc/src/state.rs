//! Statevector simulation of the joint client-pair + server-register system.
//!
//! Qubit `k` of an n-qubit register is bit `k` of the amplitude index, so
//! basis kets read `|q_{n-1} ... q_1 q_0>` right to left. Two-qubit gates
//! take the first qubit of the pair as the high bit of the 4-dimensional
//! local index.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{Unitary2, Unitary4, FRAC_1_SQRT_2};
use crate::pauli::PauliLabel;

/// Default cap on register size; 2^16 amplitudes.
pub const MAX_QUBITS: usize = 16;

const NORM_TOL: f64 = 1e-10;

/// Pure state of `num_qubits` qubits.
#[derive(Clone, Debug)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<C64>,
}

/// What to do with the two qubits consumed by a Bell measurement.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum MeasuredQubits {
    /// Drop them from the register (they factor out after projection).
    Remove,
    /// Keep them, collapsed onto the outcome Bell state.
    Keep,
}

impl StateVector {
    /// |0...0> on `num_qubits` qubits.
    pub fn zero_state(num_qubits: usize) -> Result<Self> {
        Self::zero_state_with_limit(num_qubits, MAX_QUBITS)
    }

    pub fn zero_state_with_limit(num_qubits: usize, max: usize) -> Result<Self> {
        if num_qubits > max {
            return Err(Error::TooManyQubits {
                requested: num_qubits,
                max,
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = C64::new(1.0, 0.0);
        Ok(StateVector { num_qubits, amps })
    }

    /// Build from raw amplitudes; length must be a power of two and the
    /// vector normalized.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n = amps.len();
        if n == 0 || n & (n - 1) != 0 {
            return Err(Error::BadProgram(format!(
                "amplitude vector length {n} is not a power of two"
            )));
        }
        let num_qubits = n.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits {
                requested: num_qubits,
                max: MAX_QUBITS,
            });
        }
        let s = StateVector { num_qubits, amps };
        let norm = s.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::BadProgram(format!(
                "state vector norm {norm} is not 1"
            )));
        }
        Ok(s)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            return Err(Error::QubitOutOfRange {
                index: q,
                num_qubits: self.num_qubits,
            });
        }
        Ok(())
    }

    /// Tensor with another state; `other`'s qubits land above `self`'s.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let total = self.num_qubits + other.num_qubits;
        if total > MAX_QUBITS {
            return Err(Error::TooManyQubits {
                requested: total,
                max: MAX_QUBITS,
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << total];
        for (hi, b) in other.amps.iter().enumerate() {
            if b.norm_sqr() == 0.0 {
                continue;
            }
            let base = hi << self.num_qubits;
            for (lo, a) in self.amps.iter().enumerate() {
                amps[base | lo] = a * b;
            }
        }
        Ok(StateVector {
            num_qubits: total,
            amps,
        })
    }

    /// Apply a single-qubit unitary in place.
    pub fn apply_1q(&mut self, qubit: usize, u: &Unitary2) -> Result<()> {
        self.check_qubit(qubit)?;
        let m = u.as_matrix();
        let bit = 1usize << qubit;
        for base in 0..self.amps.len() {
            if base & bit != 0 {
                continue;
            }
            let i0 = base;
            let i1 = base | bit;
            let a0 = self.amps[i0];
            let a1 = self.amps[i1];
            self.amps[i0] = m[(0, 0)] * a0 + m[(0, 1)] * a1;
            self.amps[i1] = m[(1, 0)] * a0 + m[(1, 1)] * a1;
        }
        Ok(())
    }

    /// Apply a two-qubit unitary to the ordered pair (q1, q2); q1 indexes the
    /// high bit of the gate's 4-dimensional basis.
    pub fn apply_2q(&mut self, pair: (usize, usize), w: &Unitary4) -> Result<()> {
        let (q1, q2) = pair;
        self.check_qubit(q1)?;
        self.check_qubit(q2)?;
        if q1 == q2 {
            return Err(Error::DuplicateQubit(q1));
        }
        let m = w.as_matrix();
        let b1 = 1usize << q1;
        let b2 = 1usize << q2;
        for base in 0..self.amps.len() {
            if base & b1 != 0 || base & b2 != 0 {
                continue;
            }
            let idx = [base, base | b2, base | b1, base | b1 | b2];
            let old = [
                self.amps[idx[0]],
                self.amps[idx[1]],
                self.amps[idx[2]],
                self.amps[idx[3]],
            ];
            for (r, &i) in idx.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (col, &o) in old.iter().enumerate() {
                    acc += m[(r, col)] * o;
                }
                self.amps[i] = acc;
            }
        }
        Ok(())
    }

    fn renormalize(&mut self) {
        let norm = self.norm();
        if norm > 0.0 {
            let inv = 1.0 / norm;
            for a in &mut self.amps {
                *a *= inv;
            }
        }
    }

    /// The four Bell states on a 2-qubit subsystem, indexed by the Pauli
    /// label they teleport: Phi+ -> I, Psi+ -> X, Psi- -> Y, Phi- -> Z.
    fn bell_vector(label: PauliLabel) -> [C64; 4] {
        let s = FRAC_1_SQRT_2;
        match label {
            PauliLabel::I => [C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)],
            PauliLabel::X => [C64::new(0.0, 0.0), C64::new(s, 0.0), C64::new(s, 0.0), C64::new(0.0, 0.0)],
            PauliLabel::Y => [C64::new(0.0, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0), C64::new(0.0, 0.0)],
            PauliLabel::Z => [C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-s, 0.0)],
        }
    }

    /// Inner products <B_label| on (q1, q2), leaving a state on the remaining
    /// qubits (unnormalized).
    fn project_pair(&self, q1: usize, q2: usize, label: PauliLabel) -> Vec<C64> {
        let bell = Self::bell_vector(label);
        let b1 = 1usize << q1;
        let b2 = 1usize << q2;
        let mut rest = vec![C64::new(0.0, 0.0); 1 << (self.num_qubits - 2)];
        for base in 0..self.amps.len() {
            if base & b1 != 0 || base & b2 != 0 {
                continue;
            }
            // Pack remaining bits into a contiguous index.
            let rest_idx = compress_index(base, &[q1, q2]);
            let mut acc = C64::new(0.0, 0.0);
            for (k, amp_idx) in [base, base | b2, base | b1, base | b1 | b2]
                .into_iter()
                .enumerate()
            {
                acc += bell[k].conj() * self.amps[amp_idx];
            }
            rest[rest_idx] = acc;
        }
        rest
    }

    /// Projective Bell-basis measurement of (q1, q2) with Born sampling.
    ///
    /// Returns the by-product label under the fixed convention (see
    /// [`StateVector::bell_vector`]). With [`MeasuredQubits::Remove`] the two
    /// measured qubits leave the register and higher indices shift down.
    pub fn bell_measure<R: Rng + ?Sized>(
        &mut self,
        q1: usize,
        q2: usize,
        mode: MeasuredQubits,
        rng: &mut R,
    ) -> Result<PauliLabel> {
        self.check_qubit(q1)?;
        self.check_qubit(q2)?;
        if q1 == q2 {
            return Err(Error::DuplicateQubit(q1));
        }
        let mut probs = [0.0f64; 4];
        let mut branches: Vec<Vec<C64>> = Vec::with_capacity(4);
        for (k, &label) in PauliLabel::ALL.iter().enumerate() {
            let rest = self.project_pair(q1, q2, label);
            probs[k] = rest.iter().map(|a| a.norm_sqr()).sum();
            branches.push(rest);
        }
        let outcome = sample_index(&probs, rng);
        let label = PauliLabel::ALL[outcome];
        let rest = branches.swap_remove(outcome);
        match mode {
            MeasuredQubits::Remove => {
                self.num_qubits -= 2;
                self.amps = rest;
                self.renormalize();
            }
            MeasuredQubits::Keep => {
                // Re-embed rest (x) |B_label> on (q1, q2).
                let bell = Self::bell_vector(label);
                let mut amps = vec![C64::new(0.0, 0.0); self.amps.len()];
                let b1 = 1usize << q1;
                let b2 = 1usize << q2;
                for base in 0..amps.len() {
                    if base & b1 != 0 || base & b2 != 0 {
                        continue;
                    }
                    let rest_idx = compress_index(base, &[q1, q2]);
                    for (k, amp_idx) in [base, base | b2, base | b1, base | b1 | b2]
                        .into_iter()
                        .enumerate()
                    {
                        amps[amp_idx] = rest[rest_idx] * bell[k];
                    }
                }
                self.amps = amps;
                self.renormalize();
            }
        }
        Ok(label)
    }

    /// Measure one qubit in an arbitrary orthonormal basis; collapse and
    /// renormalize. Returns the outcome index.
    pub fn measure_basis<R: Rng + ?Sized>(
        &mut self,
        qubit: usize,
        basis: &MeasurementBasis,
        rng: &mut R,
    ) -> Result<usize> {
        self.check_qubit(qubit)?;
        if basis.dim() != 2 {
            return Err(Error::DimensionMismatch {
                left: basis.dim(),
                right: 2,
            });
        }
        let bit = 1usize << qubit;
        let mut probs = vec![0.0f64; basis.outcomes.len()];
        for base in 0..self.amps.len() {
            if base & bit != 0 {
                continue;
            }
            let a0 = self.amps[base];
            let a1 = self.amps[base | bit];
            for (k, v) in basis.outcomes.iter().enumerate() {
                let overlap = v[0].conj() * a0 + v[1].conj() * a1;
                probs[k] += overlap.norm_sqr();
            }
        }
        let outcome = sample_index(&probs, rng);
        let v = &basis.outcomes[outcome];
        for base in 0..self.amps.len() {
            if base & bit != 0 {
                continue;
            }
            let a0 = self.amps[base];
            let a1 = self.amps[base | bit];
            let overlap = v[0].conj() * a0 + v[1].conj() * a1;
            self.amps[base] = overlap * v[0];
            self.amps[base | bit] = overlap * v[1];
        }
        self.renormalize();
        Ok(outcome)
    }

    /// Z-basis measurement of one qubit, returning the bit.
    pub fn measure_z<R: Rng + ?Sized>(&mut self, qubit: usize, rng: &mut R) -> Result<u8> {
        let outcome = self.measure_basis(qubit, &MeasurementBasis::computational(), rng)?;
        Ok(outcome as u8)
    }

    /// Move a qubit to a new position, shifting the ones in between.
    pub fn move_qubit(&mut self, from: usize, to: usize) -> Result<()> {
        self.check_qubit(from)?;
        self.check_qubit(to)?;
        if from == to {
            return Ok(());
        }
        let n = self.num_qubits;
        let perm: Vec<usize> = (0..n)
            .map(|new_pos| {
                // old qubit index that lands at new_pos
                if new_pos == to {
                    from
                } else if from < to {
                    if new_pos >= from && new_pos < to {
                        new_pos + 1
                    } else {
                        new_pos
                    }
                } else if new_pos > to && new_pos <= from {
                    new_pos - 1
                } else {
                    new_pos
                }
            })
            .collect();
        let mut amps = vec![C64::new(0.0, 0.0); self.amps.len()];
        for old in 0..self.amps.len() {
            let mut new = 0usize;
            for (new_pos, &old_pos) in perm.iter().enumerate() {
                if old & (1 << old_pos) != 0 {
                    new |= 1 << new_pos;
                }
            }
            amps[new] = self.amps[old];
        }
        self.amps = amps;
        Ok(())
    }

    /// Partial trace keeping `keep` (ascending order defines the row index).
    pub fn reduced_density(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::BadKeepSet);
        }
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        for &q in &keep {
            self.check_qubit(q).map_err(|_| Error::BadKeepSet)?;
        }
        let k = keep.len();
        let dim = 1usize << k;
        let mut rho = DMatrix::<C64>::zeros(dim, dim);
        let traced: Vec<usize> = (0..self.num_qubits).filter(|q| !keep.contains(q)).collect();
        for idx in 0..self.amps.len() {
            let a = self.amps[idx];
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let row = extract_bits(idx, &keep);
            let env = extract_bits(idx, &traced);
            for jdx in 0..self.amps.len() {
                if extract_bits(jdx, &traced) != env {
                    continue;
                }
                let col = extract_bits(jdx, &keep);
                rho[(row, col)] += a * self.amps[jdx].conj();
            }
        }
        Ok(DensityMatrix(rho))
    }

    /// |<a|b>|^2, insensitive to global phase.
    pub fn fidelity_up_to_phase(&self, other: &StateVector) -> Result<f64> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::DimensionMismatch {
                left: self.num_qubits,
                right: other.num_qubits,
            });
        }
        let mut acc = C64::new(0.0, 0.0);
        for (a, b) in self.amps.iter().zip(other.amps.iter()) {
            acc += a.conj() * b;
        }
        Ok(acc.norm_sqr())
    }
}

/// Drop the bits at `removed` positions, compacting the rest.
fn compress_index(idx: usize, removed: &[usize]) -> usize {
    let mut out = 0usize;
    let mut out_pos = 0;
    for bit in 0..=MAX_QUBITS + 2 {
        if removed.contains(&bit) {
            continue;
        }
        if idx & (1 << bit) != 0 {
            out |= 1 << out_pos;
        }
        out_pos += 1;
    }
    out
}

/// Gather the bits of `idx` at `positions` (ascending) into a packed value.
fn extract_bits(idx: usize, positions: &[usize]) -> usize {
    let mut out = 0usize;
    for (k, &p) in positions.iter().enumerate() {
        if idx & (1 << p) != 0 {
            out |= 1 << k;
        }
    }
    out
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut x: f64 = rng.gen::<f64>() * total;
    for (k, &p) in probs.iter().enumerate() {
        if x < p {
            return k;
        }
        x -= p;
    }
    probs.len() - 1
}

/// Prepare |Phi_v> = (1 (x) v)(|00> + |11>)/sqrt(2); v acts on qubit 1.
pub fn prepare_phi_v(v: &Unitary2) -> StateVector {
    let s = FRAC_1_SQRT_2;
    let mut state = StateVector {
        num_qubits: 2,
        amps: vec![
            C64::new(s, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(s, 0.0),
        ],
    };
    state.apply_1q(1, v).expect("qubit 1 exists");
    state
}

/// Orthonormal single-site measurement basis.
#[derive(Clone, Debug)]
pub struct MeasurementBasis {
    outcomes: Vec<DVector<C64>>,
}

impl MeasurementBasis {
    pub fn new(outcomes: Vec<DVector<C64>>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::DegenerateBasis);
        }
        let d = outcomes[0].len();
        if outcomes.len() != d {
            return Err(Error::DegenerateBasis);
        }
        for (i, v) in outcomes.iter().enumerate() {
            if v.len() != d || (v.norm() - 1.0).abs() > crate::linalg::TOL_EQ {
                return Err(Error::DegenerateBasis);
            }
            for w in outcomes.iter().skip(i + 1) {
                if v.dotc(w).norm() > crate::linalg::TOL_EQ {
                    return Err(Error::DegenerateBasis);
                }
            }
        }
        Ok(MeasurementBasis { outcomes })
    }

    pub fn dim(&self) -> usize {
        self.outcomes[0].len()
    }

    pub fn outcomes(&self) -> &[DVector<C64>] {
        &self.outcomes
    }

    /// {|0>, |1>}.
    pub fn computational() -> Self {
        MeasurementBasis {
            outcomes: vec![
                DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
                DVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
            ],
        }
    }

    /// The equatorial basis {(|0> ± e^{i theta} |1>)/sqrt(2)}; outcome 0 is "+".
    pub fn equatorial(theta: f64) -> Self {
        let s = FRAC_1_SQRT_2;
        let ph = C64::from_polar(s, theta);
        MeasurementBasis {
            outcomes: vec![
                DVector::from_vec(vec![C64::new(s, 0.0), ph]),
                DVector::from_vec(vec![C64::new(s, 0.0), -ph]),
            ],
        }
    }
}

/// Hermitian, trace-one, positive-semidefinite matrix on k qubits.
#[derive(Clone, Debug)]
pub struct DensityMatrix(pub DMatrix<C64>);

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.diagonal().sum()
    }

    /// Max deviation from the Hermitian/trace-one/PSD invariants:
    /// (hermiticity defect, |tr - 1|, most negative eigenvalue).
    pub fn invariant_defects(&self) -> (f64, f64, f64) {
        let herm = (&self.0 - self.0.adjoint()).norm();
        let tr = (self.trace() - C64::new(1.0, 0.0)).norm();
        let sym = nalgebra::SymmetricEigen::new(self.0.clone());
        let min_eig = sym.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        (herm, tr, min_eig)
    }

    pub fn is_valid(&self) -> bool {
        let (h, t, e) = self.invariant_defects();
        h < 1e-10 && t < 1e-10 && e > -1e-10
    }

    /// Max-norm distance to the maximally mixed state of the same dimension.
    pub fn max_deviation_from_mixed(&self) -> f64 {
        let d = self.dim() as f64;
        let mut dev: f64 = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let expected = if i == j {
                    C64::new(1.0 / d, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                dev = dev.max((self.0[(i, j)] - expected).norm());
            }
        }
        dev
    }

    /// Trace distance (1/2)||rho - sigma||_1 via Hermitian eigenvalues.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = &self.0 - &other.0;
        let sym = nalgebra::SymmetricEigen::new(diff);
        0.5 * sym.eigenvalues.iter().map(|e| e.abs()).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{haar_su2, z_rotation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn phi_v_examples() {
        let s = FRAC_1_SQRT_2;
        let bell = prepare_phi_v(&Unitary2::identity());
        assert!((bell.amps[0] - c(s, 0.0)).norm() < 1e-14);
        assert!(bell.amps[1].norm() < 1e-14);
        assert!(bell.amps[2].norm() < 1e-14);
        assert!((bell.amps[3] - c(s, 0.0)).norm() < 1e-14);

        // v = X -> (|01> + |10>)/sqrt(2)
        let psi = prepare_phi_v(&Unitary2::pauli_x());
        assert!(psi.amps[0].norm() < 1e-14);
        assert!((psi.amps[1].norm_sqr() - 0.5).abs() < 1e-12);
        assert!((psi.amps[2].norm_sqr() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reduced_density_of_phi_v_is_mixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let v = haar_su2(&mut rng);
            let s = prepare_phi_v(&v);
            for q in [0usize, 1] {
                let rho = s.reduced_density(&[q]).unwrap();
                assert!(rho.max_deviation_from_mixed() < 1e-12);
            }
        }
        let hz = Unitary2::hadamard().mul(&z_rotation(std::f64::consts::FRAC_PI_4).unwrap());
        let rho = prepare_phi_v(&hz).reduced_density(&[1]).unwrap();
        assert!(rho.max_deviation_from_mixed() < 1e-12);
    }

    #[test]
    fn reduced_density_basics() {
        let mut s = StateVector::zero_state(2).unwrap();
        let rho = s.reduced_density(&[0]).unwrap();
        assert!((rho.matrix()[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(rho.is_valid());
        assert!(s.reduced_density(&[]).is_err());
        s.apply_1q(0, &Unitary2::hadamard()).unwrap();
        let rho = s.reduced_density(&[0]).unwrap();
        assert!((rho.matrix()[(0, 1)] - c(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn apply_gates() {
        let mut s = StateVector::zero_state(1).unwrap();
        s.apply_1q(0, &Unitary2::pauli_x()).unwrap();
        assert!((s.amps[1] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(s.apply_1q(3, &Unitary2::pauli_x()).is_err());

        // CZ on |11> flips the sign.
        let mut s = StateVector::zero_state(2).unwrap();
        s.apply_1q(0, &Unitary2::pauli_x()).unwrap();
        s.apply_1q(1, &Unitary2::pauli_x()).unwrap();
        s.apply_2q((0, 1), &Unitary4::cz()).unwrap();
        assert!((s.amps[3] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!(s.apply_2q((0, 0), &Unitary4::cz()).is_err());
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_qubit_convention_high_bit_first() {
        // CNOT with control q1 (= high bit), target q2: |q1=1, q2=0> -> |11>.
        let mut s = StateVector::zero_state(2).unwrap();
        s.apply_1q(1, &Unitary2::pauli_x()).unwrap(); // q1 = index 1
        s.apply_2q((1, 0), &Unitary4::cnot()).unwrap();
        assert!((s.amps[0b11] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn bell_measure_on_bell_state_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mut s = prepare_phi_v(&Unitary2::identity());
            let label = s
                .bell_measure(0, 1, MeasuredQubits::Keep, &mut rng)
                .unwrap();
            assert_eq!(label, PauliLabel::I);
        }
    }

    #[test]
    fn teleportation_contract() {
        // |psi>_0 (x) PhiV_(1,2), measure (0,1): qubit 2 carries V·sigma|psi>.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = [0usize; 4];
        for trial in 0..400 {
            let v = haar_su2(&mut rng);
            let psi = haar_su2(&mut rng);
            let mut input = StateVector::zero_state(1).unwrap();
            input.apply_1q(0, &psi).unwrap();
            let pair = prepare_phi_v(&v);
            let mut joint = input.tensor(&pair).unwrap();
            let sigma = joint
                .bell_measure(0, 1, MeasuredQubits::Remove, &mut rng)
                .unwrap();
            counts[PauliLabel::ALL.iter().position(|&l| l == sigma).unwrap()] += 1;
            assert_eq!(joint.num_qubits(), 1);
            let mut expected = StateVector::zero_state(1).unwrap();
            expected.apply_1q(0, &psi).unwrap();
            expected.apply_1q(0, &sigma.matrix()).unwrap();
            expected.apply_1q(0, &v).unwrap();
            let f = joint.fidelity_up_to_phase(&expected).unwrap();
            assert!(f > 1.0 - 1e-10, "trial {trial}: fidelity {f}");
        }
        for &n in &counts {
            assert!(n > 40, "sigma counts skewed: {counts:?}");
        }
    }

    #[test]
    fn measure_basis_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // |0> in Z basis -> outcome 0 with probability 1.
        let mut s = StateVector::zero_state(1).unwrap();
        let o = s
            .measure_basis(0, &MeasurementBasis::computational(), &mut rng)
            .unwrap();
        assert_eq!(o, 0);
        // |+> in the theta = 0 equatorial basis -> outcome "+" always.
        for _ in 0..20 {
            let mut s = StateVector::zero_state(1).unwrap();
            s.apply_1q(0, &Unitary2::hadamard()).unwrap();
            let o = s
                .measure_basis(0, &MeasurementBasis::equatorial(0.0), &mut rng)
                .unwrap();
            assert_eq!(o, 0);
        }
        // |0> in any equatorial basis: both outcomes probability 1/2.
        let mut plus = 0;
        let n = 4000;
        for _ in 0..n {
            let mut s = StateVector::zero_state(1).unwrap();
            let o = s
                .measure_basis(0, &MeasurementBasis::equatorial(1.234), &mut rng)
                .unwrap();
            if o == 0 {
                plus += 1;
            }
        }
        let freq = plus as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.05, "freq {freq}");
    }

    #[test]
    fn degenerate_basis_rejected() {
        let v = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(MeasurementBasis::new(vec![v.clone(), v]).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let zero = StateVector::zero_state(1).unwrap();
        let mut one = StateVector::zero_state(1).unwrap();
        one.apply_1q(0, &Unitary2::pauli_x()).unwrap();
        assert!((zero.fidelity_up_to_phase(&zero).unwrap() - 1.0).abs() < 1e-14);
        assert!(zero.fidelity_up_to_phase(&one).unwrap() < 1e-14);
        let mut phased = zero.clone();
        phased.apply_1q(0, &Unitary2::identity().scale_phase(C64::from_polar(1.0, 0.9))).unwrap();
        assert!((zero.fidelity_up_to_phase(&phased).unwrap() - 1.0).abs() < 1e-12);
        assert!(zero
            .fidelity_up_to_phase(&StateVector::zero_state(2).unwrap())
            .is_err());
    }

    #[test]
    fn move_qubit_permutes() {
        // |q2 q1 q0> = |001>: move qubit 0 to position 2 gives |100>.
        let mut s = StateVector::zero_state(3).unwrap();
        s.apply_1q(0, &Unitary2::pauli_x()).unwrap();
        s.move_qubit(0, 2).unwrap();
        assert!((s.amps[0b100] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn norm_preserved_under_random_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut s = StateVector::zero_state(4).unwrap();
        for _ in 0..60 {
            let q = rng.gen_range(0..4);
            s.apply_1q(q, &haar_su2(&mut rng)).unwrap();
            let q2 = (q + 1 + rng.gen_range(0..3)) % 4;
            s.apply_2q((q, q2), &Unitary4::cz()).unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn register_limit() {
        assert!(matches!(
            StateVector::zero_state(MAX_QUBITS + 1),
            Err(Error::TooManyQubits { .. })
        ));
    }
}
