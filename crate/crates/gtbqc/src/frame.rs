//! By-product bookkeeping and the decision procedures for the commutation
//! criteria that make protocols non-stochastic.
//!
//! All criteria are decided by exhaustive search over the finite sets
//! involved; the search result doubles as the witness table the protocols
//! consult at run time. Phases are recorded exactly: they are snapped to
//! fourth roots of unity when within tolerance, and re-verified numerically.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{relative_phase, x_rotation, z_rotation, Unitary2, Unitary4};
use crate::pauli::{PauliLabel, PauliOp, PhaseFactor};

/// Per-qubit Pauli correction with exact phase, updated instead of applying
/// physical corrections.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PauliFrame {
    entries: Vec<PauliOp>,
}

impl PauliFrame {
    pub fn identity(num_qubits: usize) -> Self {
        PauliFrame {
            entries: vec![PauliOp::IDENTITY; num_qubits],
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, qubit: usize) -> PauliOp {
        self.entries[qubit]
    }

    pub fn set(&mut self, qubit: usize, op: PauliOp) {
        self.entries[qubit] = op;
    }

    /// Left-multiply the correction on one qubit: entry <- op · entry.
    pub fn compose_left(&mut self, qubit: usize, op: PauliOp) {
        self.entries[qubit] = op.mul(self.entries[qubit]);
    }

    /// Replace the pair of entries at (q1, q2) by their image under
    /// conjugation with CZ.
    pub fn push_pair_through_cz(&mut self, q1: usize, q2: usize) {
        let (a, b) = push_through_cz((self.entries[q1], self.entries[q2]));
        self.entries[q1] = a;
        self.entries[q2] = b;
    }

    pub fn is_identity(&self) -> bool {
        self.entries.iter().all(|e| e.label == PauliLabel::I)
    }
}

fn pauli_pair_matrix(p: (PauliOp, PauliOp)) -> Unitary4 {
    p.0.matrix().kron(&p.1.matrix())
}

/// The unique Pauli pair q with CZ · p = q · CZ, phases tracked exactly.
///
/// Found by matching the conjugated matrix against all 16 label pairs; the
/// arithmetic involves only 0 and ±1, ±i entries, so the match is exact.
pub fn push_through_cz(p: (PauliOp, PauliOp)) -> (PauliOp, PauliOp) {
    let cz = Unitary4::cz();
    let target = cz.mul(&pauli_pair_matrix(p)).mul(&cz.adjoint());
    for &l1 in &PauliLabel::ALL {
        for &l2 in &PauliLabel::ALL {
            let candidate = pauli_pair_matrix((PauliOp::new(l1), PauliOp::new(l2)));
            if let Some(phase) = relative_phase(target.as_matrix(), candidate.as_matrix()) {
                let ph = PhaseFactor::from_complex(phase, 1e-9)
                    .expect("CZ conjugation phase is a fourth root of unity");
                return (PauliOp::with_phase(l1, ph), PauliOp::new(l2));
            }
        }
    }
    unreachable!("CZ normalizes the Pauli group");
}

/// rot(axis, theta) · sigma = sigma · rot(axis, theta'), with theta' = -theta
/// exactly when sigma anticommutes with the axis.
pub fn rotation_commute(sigma: PauliOp, theta: f64, axis: PauliLabel) -> (PauliOp, f64) {
    let flipped = if sigma.label.commutes_with(axis) {
        theta
    } else {
        -theta
    };
    (sigma, flipped)
}

/// Witness for W(σ1 ⊗ σ2) = phase · (σ1' ⊗ σ2') W.
#[derive(Clone, Debug, Serialize)]
pub struct TwoQubitWitness {
    pub input: (PauliLabel, PauliLabel),
    pub output: (PauliLabel, PauliLabel),
    #[serde(serialize_with = "crate::transcript::serialize_c64")]
    pub phase: C64,
}

/// Outcome of the two-qubit criterion W·Σ⊗Σ ⊆ Σ⊗Σ·W.
#[derive(Clone, Debug, Serialize)]
pub enum TwoQubitCommutation {
    Holds { witnesses: Vec<TwoQubitWitness> },
    Fails { counterexample: (PauliLabel, PauliLabel) },
}

impl TwoQubitCommutation {
    pub fn holds(&self) -> bool {
        matches!(self, TwoQubitCommutation::Holds { .. })
    }
}

/// Exhaustive check that Pauli pairs pass through `w`: for every σ1 ⊗ σ2
/// there must be σ1' ⊗ σ2' with W(σ1⊗σ2) = (σ1'⊗σ2')W up to phase.
pub fn check_two_qubit_commutation(w: &Unitary4) -> TwoQubitCommutation {
    let mut witnesses = Vec::with_capacity(16);
    for &l1 in &PauliLabel::ALL {
        for &l2 in &PauliLabel::ALL {
            let lhs = w.mul(&pauli_pair_matrix((PauliOp::new(l1), PauliOp::new(l2))));
            let mut found = None;
            'search: for &o1 in &PauliLabel::ALL {
                for &o2 in &PauliLabel::ALL {
                    let rhs = pauli_pair_matrix((PauliOp::new(o1), PauliOp::new(o2))).mul(w);
                    if let Some(phase) = relative_phase(lhs.as_matrix(), rhs.as_matrix()) {
                        found = Some(TwoQubitWitness {
                            input: (l1, l2),
                            output: (o1, o2),
                            phase: snap_phase(phase),
                        });
                        break 'search;
                    }
                }
            }
            match found {
                Some(wit) => witnesses.push(wit),
                None => {
                    return TwoQubitCommutation::Fails {
                        counterexample: (l1, l2),
                    }
                }
            }
        }
    }
    TwoQubitCommutation::Holds { witnesses }
}

/// Witness for V·σ = phase · σ'·V'.
#[derive(Clone, Debug, Serialize)]
pub struct OneQubitWitness {
    pub v_index: usize,
    pub sigma: PauliLabel,
    pub sigma_out: PauliLabel,
    pub v_out: usize,
    #[serde(serialize_with = "crate::transcript::serialize_c64")]
    pub phase: C64,
}

/// Outcome of the one-qubit criterion 𝒱·Σ ⊆ Σ·𝒱.
#[derive(Clone, Debug, Serialize)]
pub enum OneQubitCommutation {
    Holds { witnesses: Vec<OneQubitWitness> },
    Fails { v_index: usize, sigma: PauliLabel },
}

impl OneQubitCommutation {
    pub fn holds(&self) -> bool {
        matches!(self, OneQubitCommutation::Holds { .. })
    }

    /// Look up the witness for (v_index, sigma).
    pub fn witness(&self, v_index: usize, sigma: PauliLabel) -> Option<&OneQubitWitness> {
        match self {
            OneQubitCommutation::Holds { witnesses } => witnesses
                .iter()
                .find(|w| w.v_index == v_index && w.sigma == sigma),
            OneQubitCommutation::Fails { .. } => None,
        }
    }
}

/// Exhaustive check that for every V in the set and σ in Σ there are V' in
/// the set and σ' in Σ with V·σ = σ'·V' up to phase.
pub fn check_one_qubit_commutation(v_set: &[Unitary2]) -> OneQubitCommutation {
    let mut witnesses = Vec::new();
    for (vi, v) in v_set.iter().enumerate() {
        for &sigma in &PauliLabel::ALL {
            let lhs = v.mul(&sigma.matrix());
            let mut found = None;
            'search: for &sig_out in &PauliLabel::ALL {
                for (vj, v_out) in v_set.iter().enumerate() {
                    let rhs = sig_out.matrix().mul(v_out);
                    if let Some(phase) = relative_phase(lhs.as_matrix(), rhs.as_matrix()) {
                        found = Some(OneQubitWitness {
                            v_index: vi,
                            sigma,
                            sigma_out: sig_out,
                            v_out: vj,
                            phase: snap_phase(phase),
                        });
                        break 'search;
                    }
                }
            }
            match found {
                Some(w) => witnesses.push(w),
                None => {
                    return OneQubitCommutation::Fails {
                        v_index: vi,
                        sigma,
                    }
                }
            }
        }
    }
    OneQubitCommutation::Holds { witnesses }
}

/// One resolved entry of the substitution identity
/// `U[u_out] · V[v_index] · σ = phase · σ' · U[u_index]`.
#[derive(Clone, Debug, Serialize)]
pub struct SubstitutionEntry {
    pub v_index: usize,
    pub u_out: usize,
    pub sigma_out: PauliLabel,
    #[serde(serialize_with = "crate::transcript::serialize_c64")]
    pub phase: C64,
}

/// Table keyed by (intended gate index, choice index, by-product label).
///
/// The choice index j selects V = v_set entry matching U_j† · U_i; the entry
/// answers which gate the client should name classically and which Pauli
/// lands on the register.
#[derive(Clone, Debug, Serialize)]
pub struct SubstitutionTable {
    pub u_len: usize,
    pub v_len: usize,
    entries: BTreeMap<(usize, usize, PauliLabel), SubstitutionEntry>,
}

impl SubstitutionTable {
    pub fn lookup(&self, u_index: usize, choice: usize, sigma: PauliLabel) -> Result<&SubstitutionEntry> {
        self.entries
            .get(&(u_index, choice, sigma))
            .ok_or(Error::NoSubstitution {
                gate_index: u_index,
                choice,
                sigma: sigma.name(),
            })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize, PauliLabel), &SubstitutionEntry)> {
        self.entries.iter()
    }
}

/// Build the substitution table for `u_set` against `v_set` by exhaustive
/// search with projective equality.
///
/// For every intended gate index i, every choice j and every σ, the builder
/// first locates the v_set member equal (up to phase) to U_j† U_i, then
/// searches for (u_out, σ') such that U[u_out]·V·σ = phase·σ'·U[i]. The exact
/// phase is recorded as measured; index arithmetic that wraps the set can
/// contribute a sign, so phases are ±1 but not all identical.
pub fn build_substitution_table(u_set: &[Unitary2], v_set: &[Unitary2]) -> Result<SubstitutionTable> {
    if u_set.is_empty() || v_set.is_empty() {
        return Err(Error::BadProgram("substitution sets must be non-empty".into()));
    }
    let mut entries = BTreeMap::new();
    for (i, u_i) in u_set.iter().enumerate() {
        for (j, u_j) in u_set.iter().enumerate() {
            let v_needed = u_j.adjoint().mul(u_i);
            let v_index = v_set
                .iter()
                .position(|v| v.phase_equal(&v_needed))
                .ok_or(Error::NoSubstitution {
                    gate_index: i,
                    choice: j,
                    sigma: "-",
                })?;
            let v = &v_set[v_index];
            for &sigma in &PauliLabel::ALL {
                // The identity can have several solutions: shifting the
                // instruction index by a half turn absorbs a Pauli into the
                // set. Prefer the branch where the output Pauli is the
                // axis-swapped input (sigma·sigma' in the {1, Y} class) and
                // the phase is real: that branch keeps the communicated
                // index a bijection of the choice j.
                let mut solutions = Vec::new();
                for (u_out, u_cand) in u_set.iter().enumerate() {
                    let lhs = u_cand.mul(v).mul(&sigma.matrix());
                    for &sig_out in &PauliLabel::ALL {
                        let rhs = sig_out.matrix().mul(u_i);
                        if let Some(phase) = relative_phase(lhs.as_matrix(), rhs.as_matrix()) {
                            solutions.push(SubstitutionEntry {
                                v_index,
                                u_out,
                                sigma_out: sig_out,
                                phase: snap_phase(phase),
                            });
                        }
                    }
                }
                let rank = |e: &SubstitutionEntry| {
                    let swapped = matches!(
                        sigma.mul(e.sigma_out).0,
                        PauliLabel::I | PauliLabel::Y
                    );
                    (!swapped, e.phase.im.abs() > 1e-9, e.u_out)
                };
                solutions.sort_by_key(rank);
                match solutions.into_iter().next() {
                    Some(e) => {
                        entries.insert((i, j, sigma), e);
                    }
                    None => {
                        return Err(Error::NoSubstitution {
                            gate_index: i,
                            choice: j,
                            sigma: sigma.name(),
                        })
                    }
                }
            }
        }
    }
    Ok(SubstitutionTable {
        u_len: u_set.len(),
        v_len: v_set.len(),
        entries,
    })
}

/// The gate family of the trap-free worked example: U_i = H·Z(pi·i/4).
pub fn eighth_turn_gates() -> Vec<Unitary2> {
    let h = Unitary2::hadamard();
    (0..8)
        .map(|i| h.mul(&z_rotation(std::f64::consts::PI * i as f64 / 4.0).expect("finite")))
        .collect()
}

/// The matching rotation family V_k = Z(pi·k/4).
pub fn eighth_turn_rotations() -> Vec<Unitary2> {
    (0..8)
        .map(|k| z_rotation(std::f64::consts::PI * k as f64 / 4.0).expect("finite"))
        .collect()
}

/// The universal set {H, H·Z(pi/4), H·Z(-pi/4)}.
pub fn clifford_z_set() -> Vec<Unitary2> {
    let h = Unitary2::hadamard();
    let q = std::f64::consts::FRAC_PI_4;
    vec![
        h.clone(),
        h.mul(&z_rotation(q).expect("finite")),
        h.mul(&z_rotation(-q).expect("finite")),
    ]
}

/// The entangling choice gate: the X rotation S with R(S) = CZ(1⊗S)CZ in the
/// CNOT local-equivalence class.
pub fn entangle_choice_gate() -> Unitary2 {
    x_rotation(-std::f64::consts::FRAC_PI_2).expect("finite")
}

fn snap_phase(phase: C64) -> C64 {
    match PhaseFactor::from_complex(phase, 1e-10) {
        Some(ph) => ph.as_complex(),
        None => phase,
    }
}
