//! Client and server state machines for the circuit-model protocol variants,
//! exchanging messages over an ordered in-process channel.
//!
//! The driver alternates the two parties deterministically: the client emits
//! a message, the server consumes it and may reply, and every exchange lands
//! in the transcript with both the full payload and the server-view
//! projection.

mod direct;
mod server;
mod traps;
mod variants;

pub use direct::{resolve_request, simulate_direct};
pub use server::{CheatModel, PairProbeBasis, ServerSim};
pub use traps::{aggregate_detection, check_traps, insert_traps, DetectionEstimate, TrapLedger, TrapReport};
pub use variants::{run, run_clifford, run_haar, run_stochastic, run_trap_free};

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::PauliFrame;
use crate::linalg::Unitary2;
use crate::pauli::{PauliLabel, PauliOp};
use crate::program::brickwork_pairs;
use crate::state::{prepare_phi_v, StateVector};
use crate::transcript::{Message, Payload, SlotId, Transcript};

/// The circuit-model protocol variants.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Repeat-until-identity adaptive GT; about four rounds per gate.
    Stochastic,
    /// Clifford-prefixed rotation set with table-driven compensation.
    Clifford,
    /// Haar-random masking with explicit compensating instructions.
    Haar,
    /// Index-set protocol with the secret Pauli twirl; no traps needed.
    TrapFree,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Stochastic => "stochastic",
            Variant::Clifford => "clifford",
            Variant::Haar => "haar",
            Variant::TrapFree => "trapfree",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "stochastic" => Some(Variant::Stochastic),
            "clifford" => Some(Variant::Clifford),
            "haar" => Some(Variant::Haar),
            "trapfree" => Some(Variant::TrapFree),
            _ => None,
        }
    }
}

/// Per-run knobs. The seed is mandatory; there is no ambient entropy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunOptions {
    pub seed: u64,
    /// Abort cap for repeat-until-success GT loops.
    pub max_attempts: usize,
    /// Send all pair states of a layer before processing measurements.
    /// Changes message scheduling only, never semantics.
    pub batch_layer_pairs: bool,
    /// Ask the server for computational-basis output bits at the end.
    pub measure_outputs: bool,
    /// Negative control for the audits: skip the secret Pauli twirl.
    pub disable_tau_twirl: bool,
}

impl RunOptions {
    pub fn with_seed(seed: u64) -> Self {
        RunOptions {
            seed,
            max_attempts: 200,
            batch_layer_pairs: false,
            measure_outputs: true,
            disable_tau_twirl: false,
        }
    }
}

/// Everything observable about one slot, kept for the audits.
#[derive(Clone, Debug)]
pub struct SlotRecord {
    pub slot: SlotId,
    /// Matrices actually encoded in the sent pairs (client secret).
    pub sent: Vec<Matrix2<C64>>,
    /// True when fresh client-side secret randomization (a uniform Pauli
    /// twirl, or a Haar mask) makes each sent pair's conditional mixture
    /// exactly maximally mixed.
    pub twirled: bool,
    /// Classical instruction index, when the variant sends one.
    pub instruction_index: Option<usize>,
}

/// Result of one protocol run.
pub struct RunOutcome {
    pub transcript: Transcript,
    /// Final Pauli frame per register qubit.
    pub frame: PauliFrame,
    /// Server register state before output measurement (simulator privilege,
    /// used for verification).
    pub server_state: StateVector,
    /// Frame-corrected final state; compares against direct simulation.
    pub decoded_state: StateVector,
    /// Frame-corrected output bits, when measured.
    pub decoded_bits: Option<Vec<u8>>,
    /// Raw bits as reported by the server.
    pub reported_bits: Option<Vec<u8>>,
    /// GT rounds used by each delegated gate, in execution order.
    pub attempts: Vec<usize>,
    pub slot_records: Vec<SlotRecord>,
}

/// Shared two-party driver: owns the server, the transcript and the client's
/// secret randomness.
pub struct Engine {
    pub(crate) server: ServerSim,
    pub(crate) transcript: Transcript,
    pub(crate) client_rng: ChaCha8Rng,
    pub(crate) options: RunOptions,
    pub(crate) attempts: Vec<usize>,
    pub(crate) slot_records: Vec<SlotRecord>,
}

impl Engine {
    pub fn new(variant: Variant, num_qubits: usize, cheat: CheatModel, options: RunOptions) -> Result<Self> {
        let mut client_rng = ChaCha8Rng::seed_from_u64(options.seed);
        client_rng.set_stream(0);
        let mut born = ChaCha8Rng::seed_from_u64(options.seed);
        born.set_stream(1);
        let mut cheat_rng = ChaCha8Rng::seed_from_u64(options.seed);
        cheat_rng.set_stream(2);
        let server = ServerSim::new(num_qubits, born, cheat_rng, cheat)?;
        Ok(Engine {
            server,
            transcript: Transcript::new(variant.name(), options.seed),
            client_rng,
            options,
            attempts: Vec::new(),
            slot_records: Vec::new(),
        })
    }

    pub(crate) fn record_payload(&mut self, to_server: bool, payload: Payload) {
        let seq = self.transcript.next_seq();
        let msg = if to_server {
            Message::client_to_server(seq, payload)
        } else {
            Message::server_to_client(seq, payload)
        };
        self.transcript.push(msg);
    }

    /// One GT exchange: quantum pair out, by-product report back.
    /// Returns the label the server *reported*.
    pub(crate) fn gt_exchange(&mut self, slot: SlotId, reg_qubit: usize, v: &Matrix2<C64>) -> Result<PauliLabel> {
        let v = Unitary2::renormalized(*v);
        let pair = prepare_phi_v(&v);
        let amplitudes = pair
            .amplitudes()
            .iter()
            .map(|a| [a.re, a.im])
            .collect();
        self.record_payload(true, Payload::QuantumPair { slot, amplitudes });
        self.server.receive_pair(&pair)?;
        let actual = self.server.gt_procedure(reg_qubit)?;
        let reported = self.server.report_sigma(actual);
        self.record_payload(false, Payload::BellOutcome {
            slot,
            sigma: reported,
        });
        Ok(reported)
    }

    pub(crate) fn instruct_gate_index(&mut self, slot: SlotId, qubit: usize, index: usize, gate: &Unitary2) -> Result<()> {
        self.record_payload(true, Payload::GateIndex { slot, index });
        self.server.apply_instruction(qubit, gate)
    }

    pub(crate) fn instruct_gate_matrix(&mut self, slot: SlotId, qubit: usize, gate: &Unitary2) -> Result<()> {
        self.record_payload(true, Payload::GateMatrix {
            slot,
            matrix: crate::program::ComplexMat2::from_unitary(gate),
        });
        self.server.apply_instruction(qubit, gate)
    }

    pub(crate) fn instruct_coupling(&mut self, slot: SlotId, pair: (usize, usize), adjoint: bool) -> Result<()> {
        self.record_payload(true, Payload::ApplyCoupling { slot, adjoint });
        self.server.apply_coupling(pair)
    }

    pub(crate) fn request_output_bits(&mut self, qubits: Vec<usize>) -> Result<Vec<u8>> {
        self.record_payload(true, Payload::MeasureOutputs {
            qubits: qubits.clone(),
        });
        let bits = self.server.measure_outputs(&qubits)?;
        self.record_payload(false, Payload::OutcomeBits { bits: bits.clone() });
        Ok(bits)
    }

    /// Uniformly random secret Pauli, the quantum Vernam twirl.
    pub(crate) fn fresh_tau(&mut self) -> PauliOp {
        if self.options.disable_tau_twirl {
            return PauliOp::IDENTITY;
        }
        PauliOp::new(PauliLabel::ALL[self.client_rng.gen_range(0..4)])
    }

    /// Validate that `pairs` is exactly the brickwork schedule of `layer`.
    pub(crate) fn check_brickwork(&self, layer: usize, pairs: &[(usize, usize)]) -> Result<()> {
        let expected = brickwork_pairs(layer, self.server.num_register());
        if pairs != expected.as_slice() {
            let bad = pairs
                .iter()
                .find(|p| !expected.contains(p))
                .copied()
                .unwrap_or((0, 0));
            return Err(Error::BrickworkViolation(bad.0, bad.1));
        }
        Ok(())
    }

    /// Decode: undo the accumulated frame on a copy of the register.
    pub(crate) fn decode_state(&self, frame: &PauliFrame) -> Result<StateVector> {
        let mut state = self.server.state().clone();
        for q in 0..frame.num_qubits() {
            state.apply_1q(q, &frame.get(q).adjoint().matrix())?;
        }
        Ok(state)
    }

    /// Correct reported output bits through the frame: X and Y flip a
    /// computational-basis outcome, Z and I leave it.
    pub(crate) fn decode_bits(frame: &PauliFrame, bits: &[u8]) -> Vec<u8> {
        bits.iter()
            .enumerate()
            .map(|(q, &b)| match frame.get(q).label {
                PauliLabel::X | PauliLabel::Y => b ^ 1,
                _ => b,
            })
            .collect()
    }
}
