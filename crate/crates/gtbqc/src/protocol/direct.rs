//! Direct simulation of the intended circuit: the correctness oracle every
//! delegated run is compared against.

use crate::error::{Error, Result};
use crate::frame::{clifford_z_set, eighth_turn_gates, entangle_choice_gate};
use crate::linalg::{Unitary2, Unitary4};
use crate::program::{brickwork_pairs, CircuitProgram, EntangleChoice, GateRequest};
use crate::state::StateVector;

use super::Variant;

/// The gate set a variant resolves `Idx` requests against.
pub fn variant_gate_set(variant: Variant) -> Vec<Unitary2> {
    match variant {
        Variant::Stochastic | Variant::Clifford | Variant::Haar => clifford_z_set(),
        Variant::TrapFree => eighth_turn_gates(),
    }
}

/// Resolve one gate request. `Ok(None)` means an identity slot.
pub fn resolve_request(
    variant: Variant,
    set: &[Unitary2],
    request: &GateRequest,
) -> Result<Option<Unitary2>> {
    match request {
        GateRequest::Identity => Ok(None),
        GateRequest::Idx(i) => set
            .get(*i)
            .cloned()
            .map(Some)
            .ok_or_else(|| Error::UnsupportedGate(format!("gate index {i} out of range"))),
        GateRequest::Explicit(m) => match variant {
            Variant::Stochastic | Variant::Haar => Ok(Some(m.to_unitary()?)),
            _ => Err(Error::UnsupportedGate(
                "explicit gates are only available in the stochastic and haar variants".into(),
            )),
        },
        GateRequest::Trap => Err(Error::UnsupportedGate(
            "unresolved trap marker; call insert_traps first".into(),
        )),
    }
}

/// Simulate the intended circuit exactly: resolved single-qubit gates, then
/// per brickwork pair the spread operation W†(1 (x) U)W with U the hidden
/// choice.
pub fn simulate_direct(program: &CircuitProgram, variant: Variant) -> Result<StateVector> {
    program.validate()?;
    let set = variant_gate_set(variant);
    let n = program.num_qubits;
    let mut state = StateVector::zero_state(n)?;
    let cz = Unitary4::cz();
    let s_gate = entangle_choice_gate();
    for (l, layer) in program.layers.iter().enumerate() {
        for q in 0..n {
            if let Some(gate) = resolve_request(variant, &set, &layer.gates[q])? {
                state.apply_1q(q, &gate)?;
            }
        }
        for (&(a, b), &choice) in brickwork_pairs(l, n).iter().zip(layer.entangles.iter()) {
            state.apply_2q((a, b), &cz)?;
            if choice == EntangleChoice::Entangle {
                state.apply_1q(b, &s_gate)?;
            }
            state.apply_2q((a, b), &cz)?;
        }
    }
    Ok(state)
}
