//! Message records and replayable transcripts (schema `gtbqc-transcript/1`).
//!
//! Every record carries two payload views: `payload` is the full client-side
//! log used for replay and auditing; `server_view_payload` is the projection
//! the server actually observes, with client secrets structurally absent.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::Result;
use crate::pauli::PauliLabel;
use crate::program::ComplexMat2;

pub const TRANSCRIPT_SCHEMA: &str = "gtbqc-transcript/1";

pub(crate) fn serialize_c64<S: Serializer>(v: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [v.re, v.im].serialize(s)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

/// Where in the program a message belongs.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotId {
    pub layer: usize,
    /// Qubit index for 1q slots; lower qubit of the pair for 2q slots.
    pub qubit: usize,
    pub two_qubit: bool,
}

/// Full client-side payload. Secret fields live only here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    /// A fresh 2-qubit resource state, amplitudes as [re, im] pairs.
    QuantumPair {
        slot: SlotId,
        amplitudes: Vec<[f64; 2]>,
    },
    /// Server's reported Bell-measurement by-product.
    BellOutcome { slot: SlotId, sigma: PauliLabel },
    /// Classical gate instruction by set index (trap-free variant).
    GateIndex { slot: SlotId, index: usize },
    /// Classical gate instruction as an explicit matrix (Haar variant).
    GateMatrix { slot: SlotId, matrix: ComplexMat2 },
    /// Ask the server to apply its public two-qubit gate.
    ApplyCoupling { slot: SlotId, adjoint: bool },
    /// Ask the server to measure a register qubit in an equatorial basis.
    MeasureEquatorial { site: usize, angle: f64 },
    /// Ask the server to measure designated qubits in the computational basis.
    MeasureOutputs { qubits: Vec<usize> },
    /// Reported measurement outcome bits, in request order.
    OutcomeBits { bits: Vec<u8> },
    /// Reported single-site outcome (one-way variant).
    SiteOutcome { site: usize, outcome: u8 },
}

/// The server-visible projection of a payload.
///
/// Quantum payloads are physical qubits: the server holds them but receives
/// no classical description, so only the slot is visible. Classical payloads
/// are visible verbatim; by protocol construction they contain no secrets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServerView {
    QuantumPairReceived { slot: SlotId },
    BellOutcome { slot: SlotId, sigma: PauliLabel },
    GateIndex { slot: SlotId, index: usize },
    GateMatrix { slot: SlotId, matrix: ComplexMat2 },
    ApplyCoupling { slot: SlotId, adjoint: bool },
    MeasureEquatorial { site: usize, angle: f64 },
    MeasureOutputs { qubits: Vec<usize> },
    OutcomeBits { bits: Vec<u8> },
    SiteOutcome { site: usize, outcome: u8 },
}

impl Payload {
    pub fn server_view(&self) -> ServerView {
        match self {
            Payload::QuantumPair { slot, .. } => ServerView::QuantumPairReceived { slot: *slot },
            Payload::BellOutcome { slot, sigma } => ServerView::BellOutcome {
                slot: *slot,
                sigma: *sigma,
            },
            Payload::GateIndex { slot, index } => ServerView::GateIndex {
                slot: *slot,
                index: *index,
            },
            Payload::GateMatrix { slot, matrix } => ServerView::GateMatrix {
                slot: *slot,
                matrix: matrix.clone(),
            },
            Payload::ApplyCoupling { slot, adjoint } => ServerView::ApplyCoupling {
                slot: *slot,
                adjoint: *adjoint,
            },
            Payload::MeasureEquatorial { site, angle } => ServerView::MeasureEquatorial {
                site: *site,
                angle: *angle,
            },
            Payload::MeasureOutputs { qubits } => ServerView::MeasureOutputs {
                qubits: qubits.clone(),
            },
            Payload::OutcomeBits { bits } => ServerView::OutcomeBits { bits: bits.clone() },
            Payload::SiteOutcome { site, outcome } => ServerView::SiteOutcome {
                site: *site,
                outcome: *outcome,
            },
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Quantum,
    Classical,
}

/// One timestamped message on the duplex channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub seq: usize,
    pub direction: Direction,
    pub kind: MessageKind,
    pub payload: Payload,
    pub server_view_payload: ServerView,
}

impl Message {
    pub fn client_to_server(seq: usize, payload: Payload) -> Self {
        let server_view_payload = payload.server_view();
        let kind = match payload {
            Payload::QuantumPair { .. } => MessageKind::Quantum,
            _ => MessageKind::Classical,
        };
        Message {
            seq,
            direction: Direction::ClientToServer,
            kind,
            payload,
            server_view_payload,
        }
    }

    pub fn server_to_client(seq: usize, payload: Payload) -> Self {
        let server_view_payload = payload.server_view();
        Message {
            seq,
            direction: Direction::ServerToClient,
            kind: MessageKind::Classical,
            payload,
            server_view_payload,
        }
    }
}

/// Header line of a serialized transcript.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub schema: String,
    pub variant: String,
    pub seed: u64,
}

/// Final record of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub decoded_bits: Option<Vec<u8>>,
    pub gt_attempts: Vec<usize>,
}

/// Ordered record of every message exchanged in one run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub messages: Vec<Message>,
    pub outcome: OutcomeRecord,
}

impl Transcript {
    pub fn new(variant: &str, seed: u64) -> Self {
        Transcript {
            header: TranscriptHeader {
                schema: TRANSCRIPT_SCHEMA.to_string(),
                variant: variant.to_string(),
                seed,
            },
            messages: Vec::new(),
            outcome: OutcomeRecord::default(),
        }
    }

    pub fn push(&mut self, message: Message) {
        self.messages.push(message);
    }

    pub fn next_seq(&self) -> usize {
        self.messages.len()
    }

    /// Line-delimited JSON: header, one line per message, outcome line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        out.push_str(&serde_json::to_string(&self.header).expect("header serializes"));
        out.push('\n');
        for m in &self.messages {
            out.push_str(&serde_json::to_string(m).expect("message serializes"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&self.outcome).expect("outcome serializes"));
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: TranscriptHeader =
            serde_json::from_str(lines.next().unwrap_or_default())?;
        let mut messages = Vec::new();
        let mut outcome = OutcomeRecord::default();
        let rest: Vec<&str> = lines.collect();
        for (k, line) in rest.iter().enumerate() {
            if k + 1 == rest.len() {
                outcome = serde_json::from_str(line)?;
            } else {
                messages.push(serde_json::from_str(line)?);
            }
        }
        Ok(Transcript {
            header,
            messages,
            outcome,
        })
    }

    /// The server's entire view of the run, serialized. Used by the audits
    /// and by the secrecy-discipline checks.
    pub fn server_view_text(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            out.push_str(&serde_json::to_string(&m.server_view_payload).expect("view serializes"));
            out.push('\n');
        }
        out
    }
}
