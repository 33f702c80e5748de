//! The four circuit-model protocol runners.
//!
//! All variants share the layer loop: one GT-driven slot per qubit, then the
//! brickwork two-qubit slots, each opened and closed by the public coupling
//! with the hidden choice teleported in between. They differ in how a slot's
//! by-product is compensated:
//!
//! * stochastic — resend the conjugated correction until the by-product is
//!   the identity (about four rounds per gate);
//! * clifford — witness-table selection of the sent rotation against the
//!   accumulated frame, plus a bounded rotation-echo retry (at most three
//!   rounds) for by-products that anticommute with the rotation axis;
//! * haar — a fresh Haar mask per gate with an explicit compensating
//!   instruction, Pauli-twirled to encrypt the register;
//! * trapfree — the index-set substitution table with a secret Pauli twirl
//!   on every pair, making the classical instruction distribution uniform.

use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::OnceLock;

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::frame::{
    build_substitution_table, check_one_qubit_commutation, check_two_qubit_commutation,
    clifford_z_set, eighth_turn_gates, eighth_turn_rotations, OneQubitCommutation, PauliFrame,
    SubstitutionTable,
};
use crate::linalg::{haar_su2, x_rotation, Unitary2, Unitary4};
use crate::pauli::{PauliLabel, PauliOp, PhaseFactor};
use crate::program::{brickwork_pairs, CircuitProgram, EntangleChoice, GateRequest};
use crate::transcript::{Payload, SlotId};

use super::direct::{resolve_request, variant_gate_set};
use super::{CheatModel, Engine, RunOptions, RunOutcome, SlotRecord, Variant};

/// Dispatch on the variant.
pub fn run(
    variant: Variant,
    program: &CircuitProgram,
    cheat: CheatModel,
    options: RunOptions,
) -> Result<RunOutcome> {
    match variant {
        Variant::Stochastic => run_stochastic(program, cheat, options),
        Variant::Clifford => run_clifford(program, cheat, options),
        Variant::Haar => run_haar(program, cheat, options),
        Variant::TrapFree => run_trap_free(program, cheat, options),
    }
}

struct TrapFreeTables {
    u_set: Vec<Unitary2>,
    v_set: Vec<Unitary2>,
    table: SubstitutionTable,
}

fn trap_free_tables() -> Result<&'static TrapFreeTables> {
    static TABLES: OnceLock<Option<TrapFreeTables>> = OnceLock::new();
    TABLES
        .get_or_init(|| {
            let u_set = eighth_turn_gates();
            let v_set = eighth_turn_rotations();
            let table = build_substitution_table(&u_set, &v_set).ok()?;
            Some(TrapFreeTables { u_set, v_set, table })
        })
        .as_ref()
        .ok_or(Error::WitnessMiss)
}

struct CliffordTables {
    v_set: Vec<Unitary2>,
    v_angles: [f64; 3],
    witness: OneQubitCommutation,
}

fn clifford_tables() -> Result<&'static CliffordTables> {
    static TABLES: OnceLock<Option<CliffordTables>> = OnceLock::new();
    TABLES
        .get_or_init(|| {
            let v_set = clifford_z_set();
            let witness = check_one_qubit_commutation(&v_set);
            if !witness.holds() || !check_two_qubit_commutation(&Unitary4::cz()).holds() {
                return None;
            }
            Some(CliffordTables {
                v_set,
                v_angles: [0.0, FRAC_PI_4, -FRAC_PI_4],
                witness,
            })
        })
        .as_ref()
        .ok_or(Error::WitnessMiss)
}

/// Repeat-until-identity GT for an arbitrary gate. On success the net
/// applied operation equals `intended` up to global phase, so the caller's
/// frame is untouched.
fn stochastic_gt(
    engine: &mut Engine,
    slot: SlotId,
    qubit: usize,
    intended: &Unitary2,
    twirl: bool,
) -> Result<SlotRecord> {
    let mut sent = Vec::new();
    let mut current = intended.clone();
    let cap = engine.options.max_attempts;
    for attempt in 1..=cap {
        let tau = if twirl { engine.fresh_tau() } else { PauliOp::IDENTITY };
        let outbound = current.mul(&tau.matrix());
        sent.push(*outbound.as_matrix());
        let sigma_raw = engine.gt_exchange(slot, qubit, outbound.as_matrix())?;
        let sigma_eff = tau.mul(PauliOp::new(sigma_raw));
        if sigma_eff.label == PauliLabel::I {
            engine.attempts.push(attempt);
            return Ok(SlotRecord {
                slot,
                sent,
                twirled: twirl,
                instruction_index: None,
            });
        }
        // Undo-and-retry: the next pair carries the conjugated correction.
        current = Unitary2::renormalized(
            current.as_matrix() * sigma_eff.label.matrix().as_matrix() * current.adjoint().as_matrix(),
        );
    }
    Err(Error::ProtocolAbort { cap })
}

/// Gate shapes the clifford ladder knows how to land deterministically.
#[derive(Copy, Clone, Debug)]
enum LadderGate {
    /// A member of the Hadamard-prefixed rotation set, by index.
    SetMember { index: usize },
    /// X(beta): the entangle-choice axis (beta = 0 encodes the identity).
    XAxis { beta: f64 },
}

fn sign_for(label: PauliLabel, axis: PauliLabel) -> f64 {
    if label.commutes_with(axis) {
        1.0
    } else {
        -1.0
    }
}

fn conjugate_by_h(p: PauliOp) -> PauliOp {
    // H X H = Z, H Z H = X, H Y H = -Y.
    match p.label {
        PauliLabel::I => p,
        PauliLabel::X => PauliOp::with_phase(PauliLabel::Z, p.phase),
        PauliLabel::Z => PauliOp::with_phase(PauliLabel::X, p.phase),
        PauliLabel::Y => PauliOp::with_phase(PauliLabel::Y, p.phase.mul(PhaseFactor::MinusOne)),
    }
}

fn projectively_zero(delta: f64) -> bool {
    // X(2 pi k) and Z(2 pi k) are global phases.
    let r = delta.rem_euclid(2.0 * PI);
    !(1e-9..=2.0 * PI - 1e-9).contains(&r)
}

/// Deterministic bounded-round gate landing for the clifford variant.
///
/// Round one selects the sent rotation angle against the accumulated frame
/// (the witness-table choice). A by-product that anticommutes with the
/// rotation axis flips the landed angle; the residue is an X-axis rotation
/// echo that doubles per round and closes at a multiple of 2 pi, so gates
/// with angles in {0, ±pi/4} (and X-axis choices in {0, ±pi/2}) finish in at
/// most three rounds.
#[allow(clippy::too_many_arguments)]
fn ladder_gt(
    engine: &mut Engine,
    slot: SlotId,
    qubit: usize,
    frame: &mut PauliFrame,
    gate: LadderGate,
    witness: &OneQubitCommutation,
    v_set: &[Unitary2],
    v_angles: &[f64],
) -> Result<SlotRecord> {
    let mut sent = Vec::new();
    let mut rounds = 0usize;

    // Round 1: the axis-Z rotation (possibly H-prefixed).
    let mut delta = match gate {
        LadderGate::SetMember { index } => {
            let alpha = v_angles[index];
            let f = frame.get(qubit);
            // Witness-table selection of the compensating set member.
            let w = witness.witness(index, f.label).ok_or(Error::WitnessMiss)?;
            let beta = v_angles[w.v_out];
            let outbound = v_set[w.v_out].clone();
            sent.push(*outbound.as_matrix());
            let sigma_raw = engine.gt_exchange(slot, qubit, outbound.as_matrix())?;
            rounds += 1;
            let q = PauliOp::new(sigma_raw).mul(f);
            let landed = sign_for(q.label, PauliLabel::Z) * beta;
            frame.set(qubit, conjugate_by_h(q));
            landed - alpha
        }
        LadderGate::XAxis { beta } => {
            let f = frame.get(qubit);
            let eps = sign_for(f.label, PauliLabel::X);
            let outbound = x_rotation(eps * beta)?;
            sent.push(*outbound.as_matrix());
            let sigma_raw = engine.gt_exchange(slot, qubit, outbound.as_matrix())?;
            rounds += 1;
            let q = PauliOp::new(sigma_raw).mul(f);
            let landed = sign_for(q.label, PauliLabel::X) * eps * beta;
            frame.set(qubit, q);
            landed - beta
        }
    };

    // Echo rounds: cancel the residual X(delta), doubling on failure.
    while !projectively_zero(delta) {
        if rounds > 8 {
            return Err(Error::ProtocolAbort { cap: 8 });
        }
        let f = frame.get(qubit);
        let eps = sign_for(f.label, PauliLabel::X);
        let outbound = x_rotation(-eps * delta)?;
        sent.push(*outbound.as_matrix());
        let sigma_raw = engine.gt_exchange(slot, qubit, outbound.as_matrix())?;
        rounds += 1;
        let q = PauliOp::new(sigma_raw).mul(f);
        let s = sign_for(q.label, PauliLabel::X);
        frame.set(qubit, q);
        delta -= s * eps * delta;
    }
    engine.attempts.push(rounds);
    Ok(SlotRecord {
        slot,
        sent,
        twirled: false,
        instruction_index: None,
    })
}

/// One Haar-masked gate: fresh Haar pair, then the explicit compensating
/// instruction R = tau_new · U · F† · sigma · V†; the register ends
/// encrypted by the fresh tau.
fn haar_gate(
    engine: &mut Engine,
    slot: SlotId,
    qubit: usize,
    frame: &mut PauliFrame,
    intended: &Unitary2,
) -> Result<SlotRecord> {
    let v = haar_su2(&mut engine.client_rng);
    let sent = vec![*v.as_matrix()];
    let sigma_raw = engine.gt_exchange(slot, qubit, v.as_matrix())?;
    let tau_new = engine.fresh_tau();
    let f_prev = frame.get(qubit);
    let r = Unitary2::from_exact(
        tau_new.matrix().as_matrix()
            * intended.as_matrix()
            * f_prev.adjoint().matrix().as_matrix()
            * sigma_raw.matrix().as_matrix()
            * v.adjoint().as_matrix(),
    );
    engine.instruct_gate_matrix(slot, qubit, &r)?;
    frame.set(qubit, tau_new);
    engine.attempts.push(1);
    Ok(SlotRecord {
        slot,
        sent,
        twirled: true,
        instruction_index: None,
    })
}

/// One trap-free gate: random choice index j, the matching rotation from
/// the set twirled by a secret tau, then the table-selected classical
/// instruction. The communicated index is uniform whatever (i, tau, sigma).
#[allow(clippy::too_many_arguments)]
fn trap_free_gate(
    engine: &mut Engine,
    slot: SlotId,
    qubit: usize,
    frame: &mut PauliFrame,
    intended_index: usize,
    u_set: &[Unitary2],
    v_set: &[Unitary2],
    table: &SubstitutionTable,
) -> Result<SlotRecord> {
    let j = engine.client_rng.gen_range(0..u_set.len());
    let tau = engine.fresh_tau();
    let v_index = (intended_index + u_set.len() - j) % u_set.len();
    let outbound = v_set[v_index].mul(&tau.matrix());
    let sent = vec![*outbound.as_matrix()];
    let sigma_raw = engine.gt_exchange(slot, qubit, outbound.as_matrix())?;
    let sigma_eff = tau.mul(PauliOp::new(sigma_raw)).mul(frame.get(qubit));
    let entry = table.lookup(intended_index, j, sigma_eff.label)?;
    debug_assert_eq!(entry.v_index, v_index);
    engine.instruct_gate_index(slot, qubit, entry.u_out, &u_set[entry.u_out])?;
    let extra = PhaseFactor::from_complex(entry.phase, 1e-9).unwrap_or(PhaseFactor::PlusOne);
    frame.set(
        qubit,
        PauliOp::with_phase(entry.sigma_out, extra.mul(sigma_eff.phase)),
    );
    engine.attempts.push(1);
    Ok(SlotRecord {
        slot,
        sent,
        twirled: !engine.options.disable_tau_twirl,
        instruction_index: Some(entry.u_out),
    })
}

/// The per-slot mechanism a variant uses inside two-qubit slots.
enum SlotMech<'a> {
    Stochastic { twirl: bool },
    Ladder {
        witness: &'a OneQubitCommutation,
        v_set: &'a [Unitary2],
        v_angles: &'a [f64],
    },
    Haar,
}

fn apply_choice_gate(
    engine: &mut Engine,
    mech: &SlotMech<'_>,
    slot: SlotId,
    qubit: usize,
    frame: &mut PauliFrame,
    choice: EntangleChoice,
) -> Result<SlotRecord> {
    let s_gate = crate::frame::entangle_choice_gate();
    match mech {
        SlotMech::Stochastic { twirl } => {
            let intended = match choice {
                EntangleChoice::Identity => Unitary2::identity(),
                EntangleChoice::Entangle => s_gate,
            };
            // The teleported gate lands on top of the pending frame; send
            // the frame-conjugated gate so the frame passes through intact.
            let f = frame.get(qubit);
            let adjusted = Unitary2::renormalized(
                f.matrix().as_matrix() * intended.as_matrix() * f.adjoint().matrix().as_matrix(),
            );
            stochastic_gt(engine, slot, qubit, &adjusted, *twirl)
        }
        SlotMech::Ladder { witness, v_set, v_angles } => {
            let beta = match choice {
                EntangleChoice::Identity => 0.0,
                EntangleChoice::Entangle => -std::f64::consts::FRAC_PI_2,
            };
            ladder_gt(
                engine,
                slot,
                qubit,
                frame,
                LadderGate::XAxis { beta },
                witness,
                v_set,
                v_angles,
            )
        }
        SlotMech::Haar => {
            let intended = match choice {
                EntangleChoice::Identity => Unitary2::identity(),
                EntangleChoice::Entangle => s_gate,
            };
            haar_gate(engine, slot, qubit, frame, &intended)
        }
    }
}

/// Place one brickwork layer of two-qubit slots: for each pair the server
/// applies the public coupling, the hidden choice is teleported onto the
/// pair's second qubit, and the coupling is applied again. Both choices look
/// identical to the server except for the pair states themselves.
fn place_two_qubit_layer(
    engine: &mut Engine,
    mech: &SlotMech<'_>,
    layer: usize,
    pairs: &[(usize, usize)],
    choices: &[EntangleChoice],
    frame: &mut PauliFrame,
) -> Result<()> {
    engine.check_brickwork(layer, pairs)?;
    for (&(a, b), &choice) in pairs.iter().zip(choices.iter()) {
        let slot = SlotId {
            layer,
            qubit: a,
            two_qubit: true,
        };
        frame.push_pair_through_cz(a, b);
        engine.instruct_coupling(slot, (a, b), false)?;
        let record = apply_choice_gate(engine, mech, slot, b, frame, choice)?;
        engine.slot_records.push(record);
        frame.push_pair_through_cz(a, b);
        engine.instruct_coupling(slot, (a, b), true)?;
    }
    Ok(())
}

impl Engine {
    /// Place one layer of two-qubit slots with the generic (twirled
    /// stochastic) choice mechanism: per pair, the public coupling opens
    /// the slot, the hidden choice is teleported onto the pair's second
    /// qubit, and the coupling closes it. The pairing must follow the
    /// layer's brickwork schedule.
    pub fn place_two_qubit_layer(
        &mut self,
        layer: usize,
        pairs: &[(usize, usize)],
        choices: &[EntangleChoice],
        frame: &mut PauliFrame,
    ) -> Result<()> {
        let twirl = !self.options.disable_tau_twirl;
        place_two_qubit_layer(self, &SlotMech::Stochastic { twirl }, layer, pairs, choices, frame)
    }

    /// Snapshot the run so far into an outcome (decoding through `frame`).
    pub fn into_outcome(self, frame: PauliFrame) -> Result<RunOutcome> {
        finish(self, frame)
    }
}

fn finish(engine: Engine, frame: PauliFrame) -> Result<RunOutcome> {
    let mut engine = engine;
    let server_state = engine.server.state().clone();
    let decoded_state = engine.decode_state(&frame)?;
    let (reported_bits, decoded_bits) = if engine.options.measure_outputs {
        let qubits: Vec<usize> = (0..frame.num_qubits()).collect();
        let bits = engine.request_output_bits(qubits)?;
        let decoded = Engine::decode_bits(&frame, &bits);
        (Some(bits), Some(decoded))
    } else {
        (None, None)
    };
    let mut transcript = engine.transcript;
    transcript.outcome.decoded_bits = decoded_bits.clone();
    transcript.outcome.gt_attempts = engine.attempts.clone();
    Ok(RunOutcome {
        transcript,
        frame,
        server_state,
        decoded_state,
        decoded_bits,
        reported_bits,
        attempts: engine.attempts,
        slot_records: engine.slot_records,
    })
}

fn reject_unresolved_traps(program: &CircuitProgram) -> Result<()> {
    if !program.trap_qubits().is_empty() {
        return Err(Error::BadProgram(
            "trap markers must be resolved with insert_traps before running".into(),
        ));
    }
    Ok(())
}

/// The base adaptive protocol: every gate lands by repeat-until-identity.
pub fn run_stochastic(
    program: &CircuitProgram,
    cheat: CheatModel,
    options: RunOptions,
) -> Result<RunOutcome> {
    program.validate()?;
    reject_unresolved_traps(program)?;
    let n = program.num_qubits;
    let mut engine = Engine::new(Variant::Stochastic, n, cheat, options)?;
    let mut frame = PauliFrame::identity(n);
    let set = variant_gate_set(Variant::Stochastic);
    for (l, layer) in program.layers.iter().enumerate() {
        for q in 0..n {
            let Some(gate) = resolve_request(Variant::Stochastic, &set, &layer.gates[q])? else {
                continue;
            };
            let slot = SlotId { layer: l, qubit: q, two_qubit: false };
            let record = stochastic_gt(&mut engine, slot, q, &gate, false)?;
            engine.slot_records.push(record);
        }
        let pairs = brickwork_pairs(l, n);
        place_two_qubit_layer(
            &mut engine,
            &SlotMech::Stochastic { twirl: false },
            l,
            &pairs,
            &layer.entangles,
            &mut frame,
        )?;
    }
    finish(engine, frame)
}

/// Witness-table variant over {H, H·Z(±pi/4)} with CZ coupling.
pub fn run_clifford(
    program: &CircuitProgram,
    cheat: CheatModel,
    options: RunOptions,
) -> Result<RunOutcome> {
    program.validate()?;
    reject_unresolved_traps(program)?;
    let CliffordTables {
        v_set,
        v_angles,
        witness,
    } = clifford_tables()?;
    let n = program.num_qubits;
    let mut engine = Engine::new(Variant::Clifford, n, cheat, options)?;
    let mut frame = PauliFrame::identity(n);
    for (l, layer) in program.layers.iter().enumerate() {
        for q in 0..n {
            let idx = match &layer.gates[q] {
                GateRequest::Identity => continue,
                GateRequest::Idx(i) if *i < v_set.len() => *i,
                other => {
                    return Err(Error::UnsupportedGate(format!(
                        "clifford variant accepts set indices only, got {other:?}"
                    )))
                }
            };
            let slot = SlotId { layer: l, qubit: q, two_qubit: false };
            let record = ladder_gt(
                &mut engine,
                slot,
                q,
                &mut frame,
                LadderGate::SetMember { index: idx },
                witness,
                v_set,
                v_angles,
            )?;
            engine.slot_records.push(record);
        }
        let pairs = brickwork_pairs(l, n);
        place_two_qubit_layer(
            &mut engine,
            &SlotMech::Ladder { witness, v_set, v_angles },
            l,
            &pairs,
            &layer.entangles,
            &mut frame,
        )?;
    }
    finish(engine, frame)
}

/// Haar-masked variant: every instruction the server sees is Haar-random.
pub fn run_haar(
    program: &CircuitProgram,
    cheat: CheatModel,
    options: RunOptions,
) -> Result<RunOutcome> {
    program.validate()?;
    reject_unresolved_traps(program)?;
    let n = program.num_qubits;
    let mut engine = Engine::new(Variant::Haar, n, cheat, options)?;
    let mut frame = PauliFrame::identity(n);
    let set = variant_gate_set(Variant::Haar);
    for (l, layer) in program.layers.iter().enumerate() {
        for q in 0..n {
            let Some(gate) = resolve_request(Variant::Haar, &set, &layer.gates[q])? else {
                continue;
            };
            let slot = SlotId { layer: l, qubit: q, two_qubit: false };
            let record = haar_gate(&mut engine, slot, q, &mut frame, &gate)?;
            engine.slot_records.push(record);
        }
        let pairs = brickwork_pairs(l, n);
        place_two_qubit_layer(
            &mut engine,
            &SlotMech::Haar,
            l,
            &pairs,
            &layer.entangles,
            &mut frame,
        )?;
    }
    finish(engine, frame)
}

/// The trap-free variant over U_i = H·Z(pi i/4).
pub fn run_trap_free(
    program: &CircuitProgram,
    cheat: CheatModel,
    options: RunOptions,
) -> Result<RunOutcome> {
    program.validate()?;
    reject_unresolved_traps(program)?;
    let TrapFreeTables { u_set, v_set, table } = trap_free_tables()?;
    let n = program.num_qubits;
    let mut engine = Engine::new(Variant::TrapFree, n, cheat, options)?;
    let mut frame = PauliFrame::identity(n);
    for (l, layer) in program.layers.iter().enumerate() {
        let batched = engine.options.batch_layer_pairs;
        if batched {
            run_trap_free_layer_batched(&mut engine, &mut frame, l, layer, u_set, v_set, table)?;
        } else {
            for q in 0..n {
                let idx = match &layer.gates[q] {
                    GateRequest::Identity => continue,
                    GateRequest::Idx(i) if *i < u_set.len() => *i,
                    other => {
                        return Err(Error::UnsupportedGate(format!(
                            "trapfree variant accepts set indices only, got {other:?}"
                        )))
                    }
                };
                let slot = SlotId { layer: l, qubit: q, two_qubit: false };
                let record =
                    trap_free_gate(&mut engine, slot, q, &mut frame, idx, u_set, v_set, table)?;
                engine.slot_records.push(record);
            }
        }
        let pairs = brickwork_pairs(l, n);
        let twirl = !engine.options.disable_tau_twirl;
        place_two_qubit_layer(
            &mut engine,
            &SlotMech::Stochastic { twirl },
            l,
            &pairs,
            &layer.entangles,
            &mut frame,
        )?;
    }
    finish(engine, frame)
}

/// Batched scheduling: all pair states of a layer's single-qubit slots go
/// out first, then the measurements and instructions in qubit order. Same
/// semantics, different message order.
fn run_trap_free_layer_batched(
    engine: &mut Engine,
    frame: &mut PauliFrame,
    l: usize,
    layer: &crate::program::Layer,
    u_set: &[Unitary2],
    v_set: &[Unitary2],
    table: &SubstitutionTable,
) -> Result<()> {
    struct Pending {
        qubit: usize,
        slot: SlotId,
        intended: usize,
        j: usize,
        tau: PauliOp,
        sent: Matrix2<C64>,
    }
    let n = frame.num_qubits();
    let mut pending = Vec::new();
    for q in 0..n {
        let idx = match &layer.gates[q] {
            GateRequest::Identity => continue,
            GateRequest::Idx(i) if *i < u_set.len() => *i,
            other => {
                return Err(Error::UnsupportedGate(format!(
                    "trapfree variant accepts set indices only, got {other:?}"
                )))
            }
        };
        let slot = SlotId { layer: l, qubit: q, two_qubit: false };
        let j = engine.client_rng.gen_range(0..u_set.len());
        let tau = engine.fresh_tau();
        let v_index = (idx + u_set.len() - j) % u_set.len();
        let outbound = v_set[v_index].mul(&tau.matrix());
        pending.push(Pending {
            qubit: q,
            slot,
            intended: idx,
            j,
            tau,
            sent: *outbound.as_matrix(),
        });
    }
    // Send every pair before the first measurement.
    for p in &pending {
        let pair = crate::state::prepare_phi_v(&Unitary2::new(p.sent)?);
        let amplitudes = pair.amplitudes().iter().map(|a| [a.re, a.im]).collect();
        engine.record_payload(true, Payload::QuantumPair { slot: p.slot, amplitudes });
        engine.server.receive_pair(&pair)?;
    }
    for p in &pending {
        let actual = engine.server.gt_procedure(p.qubit)?;
        let reported = engine.server.report_sigma(actual);
        engine.record_payload(false, Payload::BellOutcome { slot: p.slot, sigma: reported });
        let sigma_eff = p.tau.mul(PauliOp::new(reported)).mul(frame.get(p.qubit));
        let entry = table.lookup(p.intended, p.j, sigma_eff.label)?;
        engine.instruct_gate_index(p.slot, p.qubit, entry.u_out, &u_set[entry.u_out])?;
        let extra = PhaseFactor::from_complex(entry.phase, 1e-9).unwrap_or(PhaseFactor::PlusOne);
        frame.set(
            p.qubit,
            PauliOp::with_phase(entry.sigma_out, extra.mul(sigma_eff.phase)),
        );
        engine.attempts.push(1);
        engine.slot_records.push(SlotRecord {
            slot: p.slot,
            sent: vec![p.sent],
            twirled: !engine.options.disable_tau_twirl,
            instruction_index: Some(entry.u_out),
        });
    }
    Ok(())
}
