use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not unitary (max |U†U - 1| = {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("dimension mismatch: {left}x{left} vs {right}x{right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("rotation angle is not finite")]
    NonFiniteAngle,

    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    QubitOutOfRange { index: usize, num_qubits: usize },

    #[error("qubit pair indices must be distinct (got {0})")]
    DuplicateQubit(usize),

    #[error("register of {requested} qubits exceeds the configured maximum of {max}")]
    TooManyQubits { requested: usize, max: usize },

    #[error("measurement basis is degenerate or not orthonormal")]
    DegenerateBasis,

    #[error("outcome count mismatch between measurement bases")]
    OutcomeCountMismatch,

    #[error("keep set for a partial trace must be non-empty and in range")]
    BadKeepSet,

    #[error("no substitution entry for gate {gate_index}, choice {choice}, by-product {sigma}")]
    NoSubstitution {
        gate_index: usize,
        choice: usize,
        sigma: &'static str,
    },

    #[error("witness table has no entry for the requested gate/by-product pair")]
    WitnessMiss,

    #[error("protocol aborted: gate teleportation exceeded {cap} attempts")]
    ProtocolAbort { cap: usize },

    #[error("two-qubit slot ({0}, {1}) violates the brickwork pairing for this layer")]
    BrickworkViolation(usize, usize),

    #[error("gate request not available in this protocol variant: {0}")]
    UnsupportedGate(String),

    #[error("trap ledger does not match the transcript: {0}")]
    TrapMismatch(String),

    #[error("no deterministic trap word of length {length} exists for this gate set")]
    TrapUnavailable { length: usize },

    #[error("measurement angle {0} is outside the allowed discrete set")]
    AngleOutsideSet(f64),

    #[error("measured operator is singular; by-product is undefined")]
    SingularOperator,

    #[error("tensor set rejected: {0}")]
    BadTensorSet(String),

    #[error("program rejected: {0}")]
    BadProgram(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("programs have different shapes; shapes are public and must match")]
    ShapeMismatch,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
