//! The single-qubit Pauli group with exact phase tracking.
//!
//! Elements are a label from Σ = {I, X, Y, Z} together with a fourth root of
//! unity. Products are evaluated from a fixed multiplication table, so group
//! arithmetic is exact; no floating point is involved until a matrix is
//! requested.

#![allow(clippy::should_implement_trait)]

use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::linalg::Unitary2;

/// Label of a Pauli operator, ignoring phase.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliLabel {
    I,
    X,
    Y,
    Z,
}

impl PauliLabel {
    pub const ALL: [PauliLabel; 4] = [PauliLabel::I, PauliLabel::X, PauliLabel::Y, PauliLabel::Z];

    /// Label product with the phase it picks up, e.g. X·Z = -i·Y.
    pub fn mul(self, rhs: PauliLabel) -> (PauliLabel, PhaseFactor) {
        use PauliLabel::*;
        use PhaseFactor::*;
        match (self, rhs) {
            (I, r) => (r, PlusOne),
            (l, I) => (l, PlusOne),
            (X, X) | (Y, Y) | (Z, Z) => (I, PlusOne),
            (X, Y) => (Z, PlusI),
            (Y, X) => (Z, MinusI),
            (Y, Z) => (X, PlusI),
            (Z, Y) => (X, MinusI),
            (Z, X) => (Y, PlusI),
            (X, Z) => (Y, MinusI),
        }
    }

    /// True if the two labels commute as operators.
    pub fn commutes_with(self, other: PauliLabel) -> bool {
        self == PauliLabel::I || other == PauliLabel::I || self == other
    }

    pub fn matrix(self) -> Unitary2 {
        match self {
            PauliLabel::I => Unitary2::identity(),
            PauliLabel::X => Unitary2::pauli_x(),
            PauliLabel::Y => Unitary2::pauli_y(),
            PauliLabel::Z => Unitary2::pauli_z(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PauliLabel::I => "I",
            PauliLabel::X => "X",
            PauliLabel::Y => "Y",
            PauliLabel::Z => "Z",
        }
    }
}

impl fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A fourth root of unity, the phase part of a Pauli-group element.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseFactor {
    PlusOne,
    PlusI,
    MinusOne,
    MinusI,
}

impl PhaseFactor {
    fn exponent(self) -> u8 {
        match self {
            PhaseFactor::PlusOne => 0,
            PhaseFactor::PlusI => 1,
            PhaseFactor::MinusOne => 2,
            PhaseFactor::MinusI => 3,
        }
    }

    fn from_exponent(e: u8) -> Self {
        match e % 4 {
            0 => PhaseFactor::PlusOne,
            1 => PhaseFactor::PlusI,
            2 => PhaseFactor::MinusOne,
            _ => PhaseFactor::MinusI,
        }
    }

    pub fn mul(self, rhs: PhaseFactor) -> PhaseFactor {
        Self::from_exponent(self.exponent() + rhs.exponent())
    }

    pub fn conj(self) -> PhaseFactor {
        Self::from_exponent((4 - self.exponent()) % 4)
    }

    pub fn as_complex(self) -> C64 {
        match self {
            PhaseFactor::PlusOne => C64::new(1.0, 0.0),
            PhaseFactor::PlusI => C64::new(0.0, 1.0),
            PhaseFactor::MinusOne => C64::new(-1.0, 0.0),
            PhaseFactor::MinusI => C64::new(0.0, -1.0),
        }
    }

    /// Snap a complex number of unit magnitude to the nearest fourth root of
    /// unity, if it is within `tol` of one.
    pub fn from_complex(c: C64, tol: f64) -> Option<PhaseFactor> {
        [
            PhaseFactor::PlusOne,
            PhaseFactor::PlusI,
            PhaseFactor::MinusOne,
            PhaseFactor::MinusI,
        ].into_iter().find(|&ph| (c - ph.as_complex()).norm() < tol)
    }
}

impl fmt::Display for PhaseFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PhaseFactor::PlusOne => "+1",
            PhaseFactor::PlusI => "+i",
            PhaseFactor::MinusOne => "-1",
            PhaseFactor::MinusI => "-i",
        };
        f.write_str(s)
    }
}

/// Element of the single-qubit Pauli group: `phase * label`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliOp {
    pub label: PauliLabel,
    pub phase: PhaseFactor,
}

impl PauliOp {
    pub const IDENTITY: PauliOp = PauliOp {
        label: PauliLabel::I,
        phase: PhaseFactor::PlusOne,
    };

    pub fn new(label: PauliLabel) -> Self {
        PauliOp {
            label,
            phase: PhaseFactor::PlusOne,
        }
    }

    pub fn with_phase(label: PauliLabel, phase: PhaseFactor) -> Self {
        PauliOp { label, phase }
    }

    /// Exact group product: matrix(self) · matrix(rhs) = matrix(result).
    pub fn mul(self, rhs: PauliOp) -> PauliOp {
        let (label, extra) = self.label.mul(rhs.label);
        PauliOp {
            label,
            phase: self.phase.mul(rhs.phase).mul(extra),
        }
    }

    /// Hermitian adjoint; labels are self-adjoint so only the phase conjugates.
    pub fn adjoint(self) -> PauliOp {
        PauliOp {
            label: self.label,
            phase: self.phase.conj(),
        }
    }

    pub fn matrix(self) -> Unitary2 {
        self.label.matrix().scale_phase(self.phase.as_complex())
    }
}

impl fmt::Display for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.phase, self.label)
    }
}

/// pauli_mul(a, b): matrix(a)·matrix(b) with the phase tracked exactly.
pub fn pauli_mul(a: PauliOp, b: PauliOp) -> PauliOp {
    a.mul(b)
}
