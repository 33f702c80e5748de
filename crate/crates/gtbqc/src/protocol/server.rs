//! The server state machine: a quantum register, the gate-teleportation
//! primitive, openly applied couplings and output measurement, plus the
//! configured cheat strategies.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Unitary2, Unitary4};
use crate::pauli::PauliLabel;
use crate::state::{MeasuredQubits, MeasurementBasis, StateVector};

/// Basis a privacy-invasive server uses on incoming pair qubits.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairProbeBasis {
    Computational,
    Equatorial(f64),
}

/// Server behaviour. The strategy is total: every decision point of the
/// protocol consults it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheatModel {
    Honest,
    /// Measure both qubits of every incoming pair before running the GT.
    MeasureIncomingPairs { basis: PairProbeBasis },
    /// Run the GT honestly but report a by-product sampled from `weights`
    /// (order I, X, Y, Z) instead of the measured one.
    ReportFalseSigma { weights: [f64; 4] },
}

impl CheatModel {
    pub fn uniform_false_sigma() -> Self {
        CheatModel::ReportFalseSigma {
            weights: [0.25; 4],
        }
    }
}

/// The server's quantum register plus its local randomness.
///
/// While a pair is in flight the state temporarily holds two extra qubits;
/// the GT procedure consumes them and relabels the pair's second qubit as
/// the register qubit it replaces.
pub struct ServerSim {
    state: StateVector,
    num_register: usize,
    /// FIFO count of received, not yet consumed pairs; pair k occupies
    /// qubits (num_register + 2k, num_register + 2k + 1).
    pairs_in_flight: usize,
    born_rng: ChaCha8Rng,
    cheat_rng: ChaCha8Rng,
    cheat: CheatModel,
}

impl ServerSim {
    pub fn new(num_register: usize, born_rng: ChaCha8Rng, cheat_rng: ChaCha8Rng, cheat: CheatModel) -> Result<Self> {
        Ok(ServerSim {
            state: StateVector::zero_state(num_register)?,
            num_register,
            pairs_in_flight: 0,
            born_rng,
            cheat_rng,
            cheat,
        })
    }

    pub fn num_register(&self) -> usize {
        self.num_register
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    /// Append a freshly received 2-qubit state to the register. A cheating
    /// server may probe it here.
    pub fn receive_pair(&mut self, pair: &StateVector) -> Result<()> {
        self.state = self.state.tensor(pair)?;
        let first = self.num_register + 2 * self.pairs_in_flight;
        self.pairs_in_flight += 1;
        if let CheatModel::MeasureIncomingPairs { basis } = &self.cheat {
            let probe = match basis {
                PairProbeBasis::Computational => MeasurementBasis::computational(),
                PairProbeBasis::Equatorial(theta) => MeasurementBasis::equatorial(*theta),
            };
            self.state.measure_basis(first, &probe, &mut self.cheat_rng)?;
            self.state
                .measure_basis(first + 1, &probe, &mut self.cheat_rng)?;
        }
        Ok(())
    }

    /// Bell-measure the register qubit against the oldest pending pair's
    /// first qubit and relabel that pair's second qubit as the new register
    /// qubit. Returns the measured by-product.
    pub fn gt_procedure(&mut self, register_qubit: usize) -> Result<PauliLabel> {
        if self.pairs_in_flight == 0 {
            return Err(Error::BadProgram("no pair available for the GT".into()));
        }
        if register_qubit >= self.num_register {
            return Err(Error::QubitOutOfRange {
                index: register_qubit,
                num_qubits: self.num_register,
            });
        }
        let pair_first = self.num_register;
        let sigma = self.state.bell_measure(
            register_qubit,
            pair_first,
            MeasuredQubits::Remove,
            &mut self.born_rng,
        )?;
        // After removing (register_qubit, pair_first), the carrier sits at
        // index num_register - 1 and any younger pairs slid down by two.
        self.state.move_qubit(self.num_register - 1, register_qubit)?;
        self.pairs_in_flight -= 1;
        Ok(sigma)
    }

    /// What the server tells the client it measured.
    pub fn report_sigma(&mut self, actual: PauliLabel) -> PauliLabel {
        match &self.cheat {
            CheatModel::ReportFalseSigma { weights } => {
                let total: f64 = weights.iter().sum();
                let mut x: f64 = self.cheat_rng.gen::<f64>() * total;
                for (k, &w) in weights.iter().enumerate() {
                    if x < w {
                        return PauliLabel::ALL[k];
                    }
                    x -= w;
                }
                PauliLabel::Z
            }
            _ => actual,
        }
    }

    /// Apply a classically instructed single-qubit gate.
    pub fn apply_instruction(&mut self, qubit: usize, u: &Unitary2) -> Result<()> {
        self.state.apply_1q(qubit, u)
    }

    /// Apply the public two-qubit coupling (CZ, self-adjoint) to a pair.
    pub fn apply_coupling(&mut self, pair: (usize, usize)) -> Result<()> {
        self.state.apply_2q(pair, &Unitary4::cz())
    }

    /// Measure register qubits in the computational basis, ascending order.
    pub fn measure_outputs(&mut self, qubits: &[usize]) -> Result<Vec<u8>> {
        let mut bits = Vec::with_capacity(qubits.len());
        for &q in qubits {
            bits.push(self.state.measure_z(q, &mut self.born_rng)?);
        }
        Ok(bits)
    }

    /// Measure one register qubit in an equatorial basis (one-way variant).
    pub fn measure_equatorial(&mut self, qubit: usize, angle: f64) -> Result<u8> {
        let outcome =
            self.state
                .measure_basis(qubit, &MeasurementBasis::equatorial(angle), &mut self.born_rng)?;
        Ok(outcome as u8)
    }
}
