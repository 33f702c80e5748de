//! Trap wires: register qubits secretly driven through known non-entangling
//! sequences whose final computational-basis outcome is deterministic, so a
//! probing or lying server shows up as a bit flip.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Unitary2;
use crate::program::{brickwork_pairs, CircuitProgram, ComplexMat2, EntangleChoice, GateRequest};

use super::direct::{resolve_request, variant_gate_set};
use super::{RunOutcome, Variant};

/// One trap wire: where it is and what bit an honest run must report.
#[derive(Clone, Debug)]
pub struct TrapEntry {
    pub qubit: usize,
    pub predicted_bit: u8,
}

/// Client-side record of the inserted traps.
#[derive(Clone, Debug, Default)]
pub struct TrapLedger {
    pub entries: Vec<TrapEntry>,
}

/// Per-run verdicts of the trap checks.
#[derive(Clone, Debug)]
pub struct TrapReport {
    /// (qubit, passed) per trap.
    pub per_trap: Vec<(usize, bool)>,
}

impl TrapReport {
    pub fn fired(&self) -> usize {
        self.per_trap.iter().filter(|(_, ok)| !ok).count()
    }

    pub fn any_fired(&self) -> bool {
        self.fired() > 0
    }
}

/// Detection rate over many runs with a Wilson 95% interval.
#[derive(Clone, Copy, Debug)]
pub struct DetectionEstimate {
    pub runs: usize,
    pub detected: usize,
    pub rate: f64,
    pub interval: (f64, f64),
}

/// Fraction of runs in which at least one trap fired.
pub fn aggregate_detection(reports: &[TrapReport]) -> DetectionEstimate {
    let runs = reports.len();
    let detected = reports.iter().filter(|r| r.any_fired()).count();
    let rate = if runs == 0 { 0.0 } else { detected as f64 / runs as f64 };
    DetectionEstimate {
        runs,
        detected,
        rate,
        interval: wilson_interval(detected, runs),
    }
}

fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054_f64;
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Replace a `density` fraction of qubits by trap wires with known
/// sequences, zeroing the entangle choices on every slot they touch.
///
/// Restricted-set variants build words from pairs whose later element has a
/// diagonal or antidiagonal net, which needs an even layer count; variants
/// with explicit gates close the word with an exact rotation instead.
pub fn insert_traps<R: Rng + ?Sized>(
    program: &CircuitProgram,
    density: f64,
    variant: Variant,
    rng: &mut R,
) -> Result<(CircuitProgram, TrapLedger)> {
    program.validate()?;
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::BadProgram(format!("trap density {density} outside [0,1]")));
    }
    let n = program.num_qubits;
    let count = ((density * n as f64).round() as usize).min(n);
    let mut qubits: Vec<usize> = (0..n).collect();
    // Partial Fisher-Yates: the first `count` entries are the traps.
    for i in 0..count {
        let j = rng.gen_range(i..n);
        qubits.swap(i, j);
    }
    let mut traps: Vec<usize> = qubits[..count].to_vec();
    traps.sort_unstable();

    let mut out = program.clone();
    let mut ledger = TrapLedger::default();
    for &q in &traps {
        let word = trap_word(variant, out.layers.len(), rng)?;
        let predicted_bit = predict_bit(variant, &word)?;
        for (l, gate) in word.into_iter().enumerate() {
            out.layers[l].gates[q] = gate;
        }
        ledger.entries.push(TrapEntry {
            qubit: q,
            predicted_bit,
        });
    }
    // Non-entangling: identity choice on every slot touching a trap.
    for (l, layer) in out.layers.iter_mut().enumerate() {
        for (k, &(a, b)) in brickwork_pairs(l, n).iter().enumerate() {
            if traps.contains(&a) || traps.contains(&b) {
                layer.entangles[k] = EntangleChoice::Identity;
            }
        }
    }
    Ok((out, ledger))
}

/// A length-`len` gate word whose net action maps |0> to a basis state.
fn trap_word<R: Rng + ?Sized>(variant: Variant, len: usize, rng: &mut R) -> Result<Vec<GateRequest>> {
    match variant {
        Variant::TrapFree => {
            if !len.is_multiple_of(2) {
                return Err(Error::TrapUnavailable { length: len });
            }
            // Pair (later, earlier) = (U_a with a in {0,4}, U_b arbitrary):
            // the product X(theta_a)Z(theta_b) is diagonal or antidiagonal.
            let mut word = Vec::with_capacity(len);
            for _ in 0..len / 2 {
                let b = rng.gen_range(0..8);
                let a = if rng.gen::<bool>() { 0 } else { 4 };
                word.push(GateRequest::Idx(b));
                word.push(GateRequest::Idx(a));
            }
            Ok(word)
        }
        Variant::Clifford => {
            if !len.is_multiple_of(2) {
                return Err(Error::TrapUnavailable { length: len });
            }
            // Pair (H, anything) nets a diagonal Z rotation.
            let mut word = Vec::with_capacity(len);
            for _ in 0..len / 2 {
                word.push(GateRequest::Idx(rng.gen_range(0..3)));
                word.push(GateRequest::Idx(0));
            }
            Ok(word)
        }
        Variant::Stochastic | Variant::Haar => {
            // Random prefix, closed by the exact rotation onto a random
            // basis state.
            let set = variant_gate_set(variant);
            let mut word: Vec<GateRequest> = (0..len.saturating_sub(1))
                .map(|_| GateRequest::Idx(rng.gen_range(0..set.len())))
                .collect();
            let mut prefix = Unitary2::identity();
            for g in &word {
                let u = resolve_request(variant, &set, g)?.expect("index resolves");
                prefix = u.mul(&prefix);
            }
            let target = rng.gen::<bool>() as usize;
            let m = prefix.as_matrix();
            // Columns of the closer: rows are <target| and <target-perp|.
            let (a, b) = (m[(0, 0)], m[(1, 0)]);
            let closer = if target == 0 {
                nalgebra::Matrix2::new(a.conj(), b.conj(), -b, a)
            } else {
                nalgebra::Matrix2::new(-b, a, a.conj(), b.conj())
            };
            word.push(GateRequest::Explicit(ComplexMat2::from_unitary(
                &Unitary2::new(closer)?,
            )));
            Ok(word)
        }
    }
}

/// Simulate the trap word on |0> and read off the deterministic bit.
fn predict_bit(variant: Variant, word: &[GateRequest]) -> Result<u8> {
    let set = variant_gate_set(variant);
    let mut acc = Unitary2::identity();
    for g in word {
        if let Some(u) = resolve_request(variant, &set, g)? {
            acc = u.mul(&acc);
        }
    }
    let m = acc.as_matrix();
    let p1 = m[(1, 0)].norm_sqr();
    if p1 < 1e-9 {
        Ok(0)
    } else if p1 > 1.0 - 1e-9 {
        Ok(1)
    } else {
        Err(Error::TrapUnavailable { length: word.len() })
    }
}

/// Compare decoded output bits against the ledger's predictions.
pub fn check_traps(outcome: &RunOutcome, ledger: &TrapLedger) -> Result<TrapReport> {
    let bits = outcome
        .decoded_bits
        .as_ref()
        .ok_or_else(|| Error::TrapMismatch("run did not measure outputs".into()))?;
    let mut per_trap = Vec::with_capacity(ledger.entries.len());
    for entry in &ledger.entries {
        let bit = *bits
            .get(entry.qubit)
            .ok_or_else(|| Error::TrapMismatch(format!("no bit for qubit {}", entry.qubit)))?;
        per_trap.push((entry.qubit, bit == entry.predicted_bit));
    }
    Ok(TrapReport { per_trap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::Layer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn blank_program(n: usize, layers: usize) -> CircuitProgram {
        CircuitProgram {
            num_qubits: n,
            layers: (0..layers)
                .map(|l| Layer {
                    gates: vec![GateRequest::Idx(0); n],
                    entangles: vec![EntangleChoice::Entangle; brickwork_pairs(l, n).len()],
                })
                .collect(),
        }
    }

    #[test]
    fn trap_words_are_deterministic_in_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for variant in [Variant::TrapFree, Variant::Clifford, Variant::Stochastic, Variant::Haar] {
            for _ in 0..40 {
                let word = trap_word(variant, 4, &mut rng).unwrap();
                predict_bit(variant, &word).unwrap();
            }
        }
    }

    #[test]
    fn trap_free_words_hit_both_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut seen = [false; 2];
        for _ in 0..50 {
            let word = trap_word(Variant::TrapFree, 6, &mut rng).unwrap();
            seen[predict_bit(Variant::TrapFree, &word).unwrap() as usize] = true;
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn odd_layer_count_unavailable_for_restricted_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            trap_word(Variant::TrapFree, 3, &mut rng),
            Err(Error::TrapUnavailable { .. })
        ));
        // Explicit-gate variants close any length.
        trap_word(Variant::Haar, 3, &mut rng).unwrap();
    }

    #[test]
    fn insert_traps_zeroes_entangle_choices() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let program = blank_program(4, 4);
        let (trapped, ledger) = insert_traps(&program, 0.5, Variant::TrapFree, &mut rng).unwrap();
        assert_eq!(ledger.entries.len(), 2);
        for entry in &ledger.entries {
            for (l, layer) in trapped.layers.iter().enumerate() {
                for (k, &(a, b)) in brickwork_pairs(l, 4).iter().enumerate() {
                    if a == entry.qubit || b == entry.qubit {
                        assert_eq!(layer.entangles[k], EntangleChoice::Identity);
                    }
                }
            }
        }
    }

    #[test]
    fn wilson_interval_sane() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo > 0.39 && lo < 0.5 && hi > 0.5 && hi < 0.61);
        let (lo, _) = wilson_interval(0, 100);
        assert!(lo.abs() < 1e-12);
    }
}
