//! Circuit programs: per-layer single-qubit gate requests plus the brickwork
//! pattern of two-qubit slots, each carrying a hidden entangle choice.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Unitary2;

/// What the client wants in one single-qubit slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateRequest {
    /// No operation this slot; no quantum message is sent.
    Identity,
    /// Index into the variant's gate set.
    Idx(usize),
    /// An explicit unitary, row-major [[re, im]; 4].
    Explicit(ComplexMat2),
    /// Marker: this qubit is a trap wire (resolved before a run).
    Trap,
}

/// Serializable 2x2 complex matrix, entries as [re, im].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexMat2(pub [[[f64; 2]; 2]; 2]);

impl ComplexMat2 {
    pub fn from_unitary(u: &Unitary2) -> Self {
        let m = u.as_matrix();
        let entry = |i: usize, j: usize| [m[(i, j)].re, m[(i, j)].im];
        ComplexMat2([[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]])
    }

    pub fn to_unitary(&self) -> Result<Unitary2> {
        let c = |e: [f64; 2]| C64::new(e[0], e[1]);
        Unitary2::new(nalgebra::Matrix2::new(
            c(self.0[0][0]),
            c(self.0[0][1]),
            c(self.0[1][0]),
            c(self.0[1][1]),
        ))
    }
}

/// The hidden choice inside one two-qubit slot.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntangleChoice {
    /// R(1) = 1: structurally present, logically nothing.
    Identity,
    /// R(S) with the entangling gate S.
    Entangle,
}

/// One layer: a gate request per qubit, then the brickwork two-qubit slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub gates: Vec<GateRequest>,
    /// One choice per brickwork pair of this layer, in pair order.
    pub entangles: Vec<EntangleChoice>,
}

/// A whole delegated program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitProgram {
    pub num_qubits: usize,
    pub layers: Vec<Layer>,
}

/// The brickwork pairs of layer `layer` on `n` qubits: even layers pair
/// (0,1),(2,3),...; odd layers pair (1,2),(3,4),...
pub fn brickwork_pairs(layer: usize, n: usize) -> Vec<(usize, usize)> {
    let start = layer % 2;
    (start..n)
        .step_by(2)
        .filter_map(|a| if a + 1 < n { Some((a, a + 1)) } else { None })
        .collect()
}

impl CircuitProgram {
    /// Validate slot counts and the brickwork schedule.
    pub fn validate(&self) -> Result<()> {
        if self.num_qubits == 0 {
            return Err(Error::BadProgram("program needs at least one qubit".into()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.gates.len() != self.num_qubits {
                return Err(Error::BadProgram(format!(
                    "layer {l} has {} gate slots for {} qubits",
                    layer.gates.len(),
                    self.num_qubits
                )));
            }
            let pairs = brickwork_pairs(l, self.num_qubits);
            if layer.entangles.len() != pairs.len() {
                return Err(Error::BadProgram(format!(
                    "layer {l} has {} entangle slots, brickwork wants {}",
                    layer.entangles.len(),
                    pairs.len()
                )));
            }
        }
        Ok(())
    }

    /// The public shape: everything a server legitimately sees about the
    /// program's structure (sizes and identity-slot placement).
    pub fn shape(&self) -> ProgramShape {
        ProgramShape {
            num_qubits: self.num_qubits,
            layers: self
                .layers
                .iter()
                .map(|l| {
                    l.gates
                        .iter()
                        .map(|g| matches!(g, GateRequest::Identity))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn trap_qubits(&self) -> Vec<usize> {
        (0..self.num_qubits)
            .filter(|&q| {
                self.layers
                    .iter()
                    .any(|l| matches!(l.gates[q], GateRequest::Trap))
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let program: CircuitProgram = serde_json::from_str(text)?;
        program.validate()?;
        Ok(program)
    }
}

/// Structural fingerprint used by the indistinguishability audit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProgramShape {
    pub num_qubits: usize,
    pub layers: Vec<Vec<bool>>,
}
