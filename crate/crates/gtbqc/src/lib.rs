//! Two-party simulator of gate-teleportation-based blind quantum computation.
//!
//! A client state machine delegates a secret circuit to a server state
//! machine over simulated quantum and classical channels. Four circuit-model
//! protocol variants and a correlation-space one-way variant are provided,
//! together with decision procedures for the commutation criteria that make
//! the non-stochastic variants work, and audits that quantify blindness
//! (server-view indistinguishability, trap detection, Haar invariance).

pub mod audit;
pub mod error;
pub mod frame;
pub mod linalg;
pub mod mqc;
pub mod pauli;
pub mod program;
pub mod protocol;
pub mod state;
pub mod transcript;

pub use error::{Error, Result};
pub use frame::{PauliFrame, SubstitutionTable};
pub use linalg::{phase_equal, Unitary2, Unitary4};
pub use pauli::{PauliLabel, PauliOp, PhaseFactor};
pub use program::{CircuitProgram, EntangleChoice, GateRequest};
pub use protocol::{CheatModel, RunOutcome, Variant};
pub use state::{DensityMatrix, MeasurementBasis, StateVector};
pub use transcript::{Message, Transcript};
