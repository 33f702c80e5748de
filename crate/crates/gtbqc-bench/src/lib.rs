//! Shared fixtures for the criterion benchmarks.

use gtbqc::program::{brickwork_pairs, CircuitProgram, EntangleChoice, GateRequest, Layer};
use gtbqc::protocol::Variant;

/// A deterministic program of the given size with mixed entangle choices.
pub fn fixed_program(variant: Variant, qubits: usize, layers: usize) -> CircuitProgram {
    let set_len = match variant {
        Variant::TrapFree => 8,
        _ => 3,
    };
    CircuitProgram {
        num_qubits: qubits,
        layers: (0..layers)
            .map(|l| Layer {
                gates: (0..qubits).map(|q| GateRequest::Idx((l + q) % set_len)).collect(),
                entangles: brickwork_pairs(l, qubits)
                    .iter()
                    .enumerate()
                    .map(|(k, _)| {
                        if (l + k) % 2 == 0 {
                            EntangleChoice::Entangle
                        } else {
                            EntangleChoice::Identity
                        }
                    })
                    .collect(),
            })
            .collect(),
    }
}
