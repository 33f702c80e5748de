//! Correlation-space measurement-based computation: matrix-product
//! amplitudes, measurement-induced operators, by-product manageability and
//! blindness criteria, and the blind one-way protocol on the 1D cluster.
//!
//! Matrices here are dynamic (d x d) so the criteria work for qudit models;
//! the executable one-way example is qubit-based.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{relative_phase, Unitary2, FRAC_1_SQRT_2};
use crate::pauli::PauliLabel;
use crate::protocol::{CheatModel, Engine, RunOptions, Variant};
use crate::state::MeasurementBasis;
use crate::transcript::{Payload, SlotId, Transcript};

pub const MPS_SCHEMA: &str = "gtbqc-mps/1";

/// The discrete target angles of the blind one-way example.
pub const ONEWAY_TARGET_ANGLES: [f64; 4] = [
    std::f64::consts::PI,
    std::f64::consts::FRAC_PI_2,
    std::f64::consts::FRAC_PI_4,
    -std::f64::consts::FRAC_PI_4,
];

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Translationally invariant MPS data: D site matrices of size d x d plus
/// boundary vectors; amplitudes are `<L| A(i_N) ... A(i_1) |R>`.
#[derive(Clone, Debug)]
pub struct MpsTensorSet {
    site_dim: usize,
    bond_dim: usize,
    matrices: Vec<DMatrix<C64>>,
    /// Bra boundary, stored as the row it multiplies with.
    left: DVector<C64>,
    right: DVector<C64>,
}

impl MpsTensorSet {
    pub fn new(
        matrices: Vec<DMatrix<C64>>,
        left: DVector<C64>,
        right: DVector<C64>,
    ) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::BadTensorSet("no site matrices".into()));
        }
        let d = matrices[0].nrows();
        for m in &matrices {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::BadTensorSet("site matrices must be square, same size".into()));
            }
            if m.iter().any(|e| !e.re.is_finite() || !e.im.is_finite()) {
                return Err(Error::BadTensorSet("non-finite tensor entry".into()));
            }
        }
        if left.len() != d || right.len() != d {
            return Err(Error::BadTensorSet("boundary vector dimension mismatch".into()));
        }
        Ok(MpsTensorSet {
            site_dim: matrices.len(),
            bond_dim: d,
            matrices,
            left,
            right,
        })
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn site_matrix(&self, i: usize) -> &DMatrix<C64> {
        &self.matrices[i]
    }

    /// The 1D cluster tensors A(0) = |+><0|, A(1) = |-><1| with boundaries
    /// <L| = <0|, |R> = |+>.
    pub fn cluster() -> Self {
        let s = FRAC_1_SQRT_2;
        let a0 = DMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(0.0, 0.0), c(s, 0.0), c(0.0, 0.0)]);
        let a1 = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(s, 0.0), c(0.0, 0.0), c(-s, 0.0)]);
        MpsTensorSet {
            site_dim: 2,
            bond_dim: 2,
            matrices: vec![a0, a1],
            left: DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]),
            right: DVector::from_vec(vec![c(s, 0.0), c(s, 0.0)]),
        }
    }

    /// `<L| A(i_N) ... A(i_1) |R>` for `config = [i_1, ..., i_N]`.
    pub fn amplitude(&self, config: &[usize]) -> Result<C64> {
        let mut acc = self.right.clone();
        for &i in config {
            if i >= self.site_dim {
                return Err(Error::QubitOutOfRange {
                    index: i,
                    num_qubits: self.site_dim,
                });
            }
            acc = &self.matrices[i] * acc;
        }
        Ok(self.left.iter().zip(acc.iter()).map(|(l, a)| l * a).sum())
    }

    /// The measurement-induced operator A[phi] = sum_i conj(phi_i) A(i).
    pub fn measured_operator(&self, phi: &DVector<C64>) -> Result<DMatrix<C64>> {
        if phi.len() != self.site_dim {
            return Err(Error::DimensionMismatch {
                left: phi.len(),
                right: self.site_dim,
            });
        }
        if (phi.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::DegenerateBasis);
        }
        let mut acc = DMatrix::<C64>::zeros(self.bond_dim, self.bond_dim);
        for (i, m) in self.matrices.iter().enumerate() {
            acc += m.map(|e| e * phi[i].conj());
        }
        Ok(acc)
    }

    /// Ordered product of measured operators; later sites multiply on the
    /// left. The empty sequence is the identity.
    pub fn correlation_sequence(&self, outcomes: &[DVector<C64>]) -> Result<DMatrix<C64>> {
        let mut acc = DMatrix::<C64>::identity(self.bond_dim, self.bond_dim);
        for phi in outcomes {
            acc = self.measured_operator(phi)? * acc;
        }
        Ok(acc)
    }

    /// The by-product E = A[phi_actual]·U†, rescaled to a unitary. Errors if
    /// the measured operator is singular.
    pub fn byproduct_of(&self, phi_actual: &DVector<C64>, u_intended: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        let a = self.measured_operator(phi_actual)?;
        let e_raw = &a * u_intended.adjoint();
        let gram = &e_raw * e_raw.adjoint();
        let scale = (gram.diagonal().sum().re / self.bond_dim as f64).sqrt();
        if scale < 1e-12 || !is_proportional_to_unitary(&e_raw) {
            return Err(Error::SingularOperator);
        }
        Ok(e_raw.map(|v| v / scale))
    }

    /// Verify that every allowed measurement outcome induces an operator
    /// proportional to a unitary; the protocols here require it.
    pub fn check_unitary_outcomes(&self, bases: &[MeasurementBasis]) -> Result<()> {
        for basis in bases {
            for phi in basis.outcomes() {
                let a = self.measured_operator(phi)?;
                if !is_proportional_to_unitary(&a) {
                    return Err(Error::BadTensorSet(
                        "a measurement outcome induces a non-unitary operator".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let ser = MpsFile {
            schema: MPS_SCHEMA.to_string(),
            site_dim: self.site_dim,
            bond_dim: self.bond_dim,
            matrices: self
                .matrices
                .iter()
                .map(|m| {
                    (0..m.nrows())
                        .map(|r| (0..m.ncols()).map(|col| [m[(r, col)].re, m[(r, col)].im]).collect())
                        .collect()
                })
                .collect(),
            left: self.left.iter().map(|v| [v.re, v.im]).collect(),
            right: self.right.iter().map(|v| [v.re, v.im]).collect(),
        };
        serde_json::to_string_pretty(&ser).expect("tensor set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MpsFile = serde_json::from_str(text)?;
        if file.schema != MPS_SCHEMA {
            return Err(Error::BadTensorSet(format!("unknown schema {}", file.schema)));
        }
        let matrices = file
            .matrices
            .iter()
            .map(|rows| {
                let d = rows.len();
                let mut m = DMatrix::<C64>::zeros(d, d);
                for (r, row) in rows.iter().enumerate() {
                    for (col, e) in row.iter().enumerate() {
                        m[(r, col)] = c(e[0], e[1]);
                    }
                }
                m
            })
            .collect();
        let left = DVector::from_vec(file.left.iter().map(|e| c(e[0], e[1])).collect());
        let right = DVector::from_vec(file.right.iter().map(|e| c(e[0], e[1])).collect());
        let set = MpsTensorSet::new(matrices, left, right)?;
        if set.site_dim != file.site_dim || set.bond_dim != file.bond_dim {
            return Err(Error::BadTensorSet("declared dimensions disagree with data".into()));
        }
        Ok(set)
    }
}

#[derive(Serialize, Deserialize)]
struct MpsFile {
    schema: String,
    site_dim: usize,
    bond_dim: usize,
    matrices: Vec<Vec<Vec<[f64; 2]>>>,
    left: Vec<[f64; 2]>,
    right: Vec<[f64; 2]>,
}

/// True if m = scale · unitary for some nonzero scale.
pub fn is_proportional_to_unitary(m: &DMatrix<C64>) -> bool {
    let gram = m * m.adjoint();
    let d = m.nrows();
    let scale = gram.diagonal().sum().re / d as f64;
    if scale < 1e-12 {
        return false;
    }
    let mut dev: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let expected = if i == j { c(scale, 0.0) } else { c(0.0, 0.0) };
            dev = dev.max((gram[(i, j)] - expected).norm());
        }
    }
    dev / scale < 1e-9
}

/// True if a = z·b for some nonzero complex z (scale-insensitive projective
/// equality, used for set inclusions where operators carry 1/sqrt(D)).
pub fn proportional(a: &DMatrix<C64>, b: &DMatrix<C64>) -> bool {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return false;
    }
    let (na, nb) = (a.norm(), b.norm());
    if na < 1e-12 || nb < 1e-12 {
        return false;
    }
    let an = a.map(|v| v / c(na, 0.0));
    let bn = b.map(|v| v / c(nb, 0.0));
    relative_phase(&an, &bn).is_some()
}

/// An explicit finite set of (phase classes of) d x d unitaries, closed
/// under multiplication up to phase and containing the identity.
#[derive(Clone, Debug)]
pub struct ByproductSet {
    elements: Vec<DMatrix<C64>>,
}

impl ByproductSet {
    pub fn new(elements: Vec<DMatrix<C64>>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::BadTensorSet("empty by-product set".into()));
        }
        let d = elements[0].nrows();
        let id = DMatrix::<C64>::identity(d, d);
        let set = ByproductSet { elements };
        if !set.contains(&id) {
            return Err(Error::BadTensorSet("by-product set must contain the identity".into()));
        }
        for a in &set.elements {
            for b in &set.elements {
                if !set.contains(&(a * b)) {
                    return Err(Error::BadTensorSet(
                        "by-product set is not closed under multiplication".into(),
                    ));
                }
            }
        }
        Ok(set)
    }

    /// The single-qubit Pauli set.
    pub fn pauli() -> Self {
        ByproductSet {
            elements: PauliLabel::ALL
                .iter()
                .map(|l| {
                    let m = l.matrix();
                    DMatrix::from_fn(2, 2, |i, j| m.as_matrix()[(i, j)])
                })
                .collect(),
        }
    }

    pub fn elements(&self) -> &[DMatrix<C64>] {
        &self.elements
    }

    pub fn contains(&self, m: &DMatrix<C64>) -> bool {
        self.index_of(m).is_some()
    }

    pub fn index_of(&self, m: &DMatrix<C64>) -> Option<usize> {
        self.elements.iter().position(|e| proportional(e, m))
    }
}

/// Witnesses for the manageability criteria: per (gate, by-product) the
/// measurement that repairs it, plus the coupling pass-through table.
#[derive(Clone, Debug)]
pub enum Manageable {
    Holds {
        repair: Vec<(usize, usize, usize)>,
        coupling: Vec<((usize, usize), (usize, usize))>,
    },
    Fails {
        counterexample: String,
    },
}

impl Manageable {
    pub fn holds(&self) -> bool {
        matches!(self, Manageable::Holds { .. })
    }
}

/// Exhaustively verify both manageability inclusions: every measured
/// operator times a by-product times an intended-gate adjoint stays in the
/// set, and by-product pairs pass through the coupling.
pub fn check_manageable(
    tensors: &MpsTensorSet,
    e_set: &ByproductSet,
    u_set: &[DMatrix<C64>],
    meas_set: &[MeasurementBasis],
    w: &DMatrix<C64>,
) -> Result<Manageable> {
    let d = tensors.bond_dim();
    if w.nrows() != d * d {
        return Err(Error::DimensionMismatch {
            left: w.nrows(),
            right: d * d,
        });
    }
    let mut repair = Vec::new();
    for (uj, u) in u_set.iter().enumerate() {
        for (ei, e) in e_set.elements().iter().enumerate() {
            let mut found = None;
            'bases: for (mi, basis) in meas_set.iter().enumerate() {
                for phi in basis.outcomes() {
                    let a = tensors.measured_operator(phi)?;
                    let prod = &a * e * u.adjoint();
                    if !e_set.contains(&prod) {
                        continue 'bases;
                    }
                }
                found = Some(mi);
                break;
            }
            match found {
                Some(mi) => repair.push((uj, ei, mi)),
                None => {
                    return Ok(Manageable::Fails {
                        counterexample: format!(
                            "no measurement repairs by-product {ei} against gate {uj}"
                        ),
                    })
                }
            }
        }
    }
    let mut coupling = Vec::new();
    for (i1, e1) in e_set.elements().iter().enumerate() {
        for (i2, e2) in e_set.elements().iter().enumerate() {
            let lhs = w * e1.kronecker(e2);
            let mut found = None;
            'outer: for (o1, f1) in e_set.elements().iter().enumerate() {
                for (o2, f2) in e_set.elements().iter().enumerate() {
                    let rhs = f1.kronecker(f2) * w;
                    if proportional(&lhs, &rhs) {
                        found = Some((o1, o2));
                        break 'outer;
                    }
                }
            }
            match found {
                Some(out) => coupling.push(((i1, i2), out)),
                None => {
                    return Ok(Manageable::Fails {
                        counterexample: format!(
                            "by-product pair ({i1},{i2}) does not pass the coupling"
                        ),
                    })
                }
            }
        }
    }
    Ok(Manageable::Holds { repair, coupling })
}

/// One resolved blindness entry: to hide target measurement `target`, under
/// pre-measurement Pauli `sigma`, any of `choices` (candidate-basis index,
/// hiding-unitary index) works.
#[derive(Clone, Debug)]
pub struct BlindEntry {
    pub target: usize,
    pub sigma: PauliLabel,
    pub choices: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub enum BlindCriterion {
    Holds { entries: Vec<BlindEntry> },
    Fails { target: usize, sigma: PauliLabel },
}

impl BlindCriterion {
    pub fn holds(&self) -> bool {
        matches!(self, BlindCriterion::Holds { .. })
    }
}

/// Exhaustively test the substitution-blindness criterion: for every target
/// basis and every Pauli, some (candidate basis, hiding unitary) makes all
/// induced operators land in the by-product set. All valid choices are kept
/// so a runner can pick uniformly among them.
pub fn check_blind_criterion(
    tensors: &MpsTensorSet,
    v_set: &[DMatrix<C64>],
    targets: &[MeasurementBasis],
    candidates: &[MeasurementBasis],
    e_set: &ByproductSet,
) -> Result<BlindCriterion> {
    let mut entries = Vec::new();
    for (ti, target) in targets.iter().enumerate() {
        for &sigma in &PauliLabel::ALL {
            let sig = sigma.matrix();
            let sig_dm = DMatrix::from_fn(2, 2, |i, j| sig.as_matrix()[(i, j)]);
            let mut choices = Vec::new();
            for (ci, cand) in candidates.iter().enumerate() {
                for (vi, v) in v_set.iter().enumerate() {
                    let mut all_ok = true;
                    'check: for phi_i in target.outcomes() {
                        let a_target = tensors.measured_operator(phi_i)?;
                        for phi_j in cand.outcomes() {
                            let rotated = &sig_dm * v.adjoint() * phi_j;
                            let norm = rotated.norm();
                            let rotated = rotated.map(|x| x / c(norm, 0.0));
                            let a = tensors.measured_operator(&rotated)?;
                            let prod = &a * a_target.adjoint();
                            if !e_set.contains(&prod) {
                                all_ok = false;
                                break 'check;
                            }
                        }
                    }
                    if all_ok {
                        choices.push((ci, vi));
                    }
                }
            }
            if choices.is_empty() {
                return Ok(BlindCriterion::Fails { target: ti, sigma });
            }
            entries.push(BlindEntry {
                target: ti,
                sigma,
                choices,
            });
        }
    }
    Ok(BlindCriterion::Holds { entries })
}

/// The basis-mapping unitary V = sum_k |m_jk><m_ik|: measuring `to` after
/// applying it is outcome-equivalent to measuring `from`.
pub fn measurement_substitution(from: &MeasurementBasis, to: &MeasurementBasis) -> Result<DMatrix<C64>> {
    if from.dim() != to.dim() || from.outcomes().len() != to.outcomes().len() {
        return Err(Error::OutcomeCountMismatch);
    }
    let d = from.dim();
    let mut v = DMatrix::<C64>::zeros(d, d);
    for (fi, ti) in from.outcomes().iter().zip(to.outcomes().iter()) {
        for r in 0..d {
            for col in 0..d {
                v[(r, col)] += ti[r] * fi[col].conj();
            }
        }
    }
    Ok(v)
}

/// How the hiding gate is landed on each site.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OneWayMode {
    /// Repeat-until-identity GT; the hiding gate lands exactly.
    Stochastic,
    /// Single GT; the raw by-product is absorbed into the instructed angle
    /// and the outcome interpretation.
    TableDriven,
}

/// Result of one blind one-way run.
pub struct OneWayOutcome {
    pub transcript: Transcript,
    /// Product of the operators actually realized in correlation space.
    pub realized: DMatrix<C64>,
    /// Product of the intended operators.
    pub intended: DMatrix<C64>,
    /// The Pauli relating them: realized ∝ byproduct · intended.
    pub byproduct: Option<PauliLabel>,
    /// Instructed measurement angles, for the uniformity audit.
    pub instructed_angles: Vec<f64>,
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn lattice_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    std::f64::consts::FRAC_PI_4 * rng.gen_range(0..8) as f64
}

fn on_lattice(angle: f64) -> bool {
    let r = angle.rem_euclid(std::f64::consts::FRAC_PI_4);
    !(1e-9..=std::f64::consts::FRAC_PI_4 - 1e-9).contains(&r)
}

/// Run the blind one-way pattern on an N-site 1D cluster held by the
/// server.
///
/// Per site the client draws a secret angle, rotates the site through the
/// GT procedure and instructs a measurement whose angle is uniform whatever
/// the target. Correlation-space by-products follow the angle-flip rules;
/// the final operator equals the intended product up to a Pauli.
pub fn run_blind_oneway(
    pattern: &[f64],
    mode: OneWayMode,
    discrete: bool,
    options: RunOptions,
) -> Result<OneWayOutcome> {
    let n = pattern.len();
    if n == 0 {
        return Err(Error::BadProgram("empty one-way pattern".into()));
    }
    if discrete {
        for &alpha in pattern {
            if !ONEWAY_TARGET_ANGLES
                .iter()
                .any(|&t| (t - alpha).abs() < 1e-9 || ((t - alpha).abs() - TWO_PI).abs() < 1e-9)
            {
                return Err(Error::AngleOutsideSet(alpha));
            }
        }
    }
    let tensors = MpsTensorSet::cluster();
    // Configuration-time check: every allowed outcome must induce an
    // operator proportional to a unitary.
    let allowed: Vec<MeasurementBasis> = (0..8)
        .map(|k| MeasurementBasis::equatorial(std::f64::consts::FRAC_PI_4 * k as f64))
        .collect();
    tensors.check_unitary_outcomes(&allowed)?;
    let mut engine = Engine::new(Variant::Stochastic, n, CheatModel::Honest, options)?;
    engine.transcript = Transcript::new("mqc-oneway", engine.options.seed);

    // Public resource preparation: |+>^n entangled by the CZ chain.
    let h = Unitary2::hadamard();
    for q in 0..n {
        engine.instruct_gate_matrix(
            SlotId { layer: 0, qubit: q, two_qubit: false },
            q,
            &h,
        )?;
    }
    for q in 0..n.saturating_sub(1) {
        engine.instruct_coupling(SlotId { layer: 0, qubit: q, two_qubit: true }, (q, q + 1), false)?;
    }

    // Correlation-space frame (z, x) and the realized/intended products.
    let mut z_flag = 0u8;
    let mut x_flag = 0u8;
    let mut realized = DMatrix::<C64>::identity(2, 2);
    let mut intended = DMatrix::<C64>::identity(2, 2);
    let mut instructed_angles = Vec::with_capacity(n);

    for (site, &alpha) in pattern.iter().enumerate() {
        let slot = SlotId { layer: 1, qubit: site, two_qubit: false };
        // By-product-adjusted target: X flips the sign, Z adds pi.
        let alpha_eff = if x_flag == 1 { -alpha } else { alpha }
            + if z_flag == 1 { std::f64::consts::PI } else { 0.0 };
        let gamma = lattice_angle(&mut engine.client_rng);
        let hiding = crate::linalg::z_rotation(-gamma)?;

        // Land the hiding rotation on the physical site.
        let residual_sigma = match mode {
            OneWayMode::Stochastic => {
                let mut current = hiding.clone();
                let cap = engine.options.max_attempts;
                let mut done = false;
                for attempt in 1..=cap {
                    let sigma = engine.gt_exchange(slot, site, current.as_matrix())?;
                    if sigma == PauliLabel::I {
                        engine.attempts.push(attempt);
                        done = true;
                        break;
                    }
                    current = Unitary2::renormalized(
                        current.as_matrix()
                            * sigma.matrix().as_matrix()
                            * current.adjoint().as_matrix(),
                    );
                }
                if !done {
                    return Err(Error::ProtocolAbort { cap });
                }
                PauliLabel::I
            }
            OneWayMode::TableDriven => {
                let sigma = engine.gt_exchange(slot, site, hiding.as_matrix())?;
                engine.attempts.push(1);
                sigma
            }
        };

        // Absorb the residual by-product into the instructed angle and the
        // outcome interpretation: X negates the effective angle, Z swaps
        // the outcome labels, Y does both.
        let (sign, flip) = match residual_sigma {
            PauliLabel::I => (1.0, 0u8),
            PauliLabel::X => (-1.0, 0),
            PauliLabel::Z => (1.0, 1),
            PauliLabel::Y => (-1.0, 1),
        };
        let beta = (sign * alpha_eff + gamma).rem_euclid(TWO_PI);
        if discrete {
            debug_assert!(on_lattice(beta));
        }
        instructed_angles.push(beta);
        engine.record_payload(true, Payload::MeasureEquatorial { site, angle: beta });
        let reported = engine.server.measure_equatorial(site, beta)?;
        engine.record_payload(false, Payload::SiteOutcome { site, outcome: reported });
        let m_eff = reported ^ flip;

        // Correlation-space bookkeeping: the realized operator is the
        // measured operator of the effective outcome vector on the pre-GT
        // state; the intended one uses the raw target angle.
        let outcome_vec = {
            let basis = MeasurementBasis::equatorial(beta);
            let raw = &basis.outcomes()[reported as usize];
            // Undo the physically applied rotation(s): the effective
            // measurement vector on the original site.
            let applied = match residual_sigma {
                PauliLabel::I => hiding.clone(),
                s => hiding.mul(&s.matrix()),
            };
            let mut v = DVector::<C64>::zeros(2);
            let mat = applied.adjoint();
            for r in 0..2 {
                v[r] = mat.as_matrix()[(r, 0)] * raw[0] + mat.as_matrix()[(r, 1)] * raw[1];
            }
            let norm = v.norm();
            v.map(|x| x / c(norm, 0.0))
        };
        realized = tensors.measured_operator(&outcome_vec)? * realized;
        let intended_basis = MeasurementBasis::equatorial(alpha);
        intended = tensors.measured_operator(&intended_basis.outcomes()[0])? * intended;

        // Standard 1D-cluster frame update: (z, x) <- (x, m).
        let new_z = x_flag;
        let new_x = m_eff;
        z_flag = new_z;
        x_flag = new_x;
    }

    let byproduct = PauliLabel::ALL.iter().copied().find(|l| {
        let m = l.matrix();
        let p = DMatrix::from_fn(2, 2, |i, j| m.as_matrix()[(i, j)]) * &intended;
        proportional(&realized, &p)
    });
    let mut transcript = engine.transcript;
    transcript.outcome.gt_attempts = engine.attempts.clone();
    Ok(OneWayOutcome {
        transcript,
        realized,
        intended,
        byproduct,
        instructed_angles,
    })
}

/// Convenience: the Pauli set as 2x2 dynamic matrices.
pub fn pauli_dmatrices() -> Vec<DMatrix<C64>> {
    PauliLabel::ALL
        .iter()
        .map(|l| {
            let m = l.matrix();
            DMatrix::from_fn(2, 2, |i, j| m.as_matrix()[(i, j)])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::z_rotation;
    use crate::state::StateVector;
    use crate::linalg::Unitary4;

    fn equatorial_vec(theta: f64, minus: bool) -> DVector<C64> {
        let basis = MeasurementBasis::equatorial(theta);
        basis.outcomes()[minus as usize].clone()
    }

    #[test]
    fn cluster_amplitudes_match_brute_force() {
        // Oracle: apply the CZ chain to |+>^N and compare every amplitude
        // after global normalization.
        let tensors = MpsTensorSet::cluster();
        for n in 1..=8usize {
            let mut state = StateVector::zero_state(n).unwrap();
            for q in 0..n {
                state.apply_1q(q, &Unitary2::hadamard()).unwrap();
            }
            for q in 0..n - 1 {
                state.apply_2q((q, q + 1), &Unitary4::cz()).unwrap();
            }
            // Collect MPS amplitudes; site t is statevector qubit t-1.
            let mut amps = Vec::with_capacity(1 << n);
            for idx in 0..(1usize << n) {
                let config: Vec<usize> = (0..n).map(|t| (idx >> t) & 1).collect();
                amps.push(tensors.amplitude(&config).unwrap());
            }
            let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            for (idx, amp) in amps.iter().enumerate() {
                let expected = state.amplitudes()[idx];
                assert!(
                    (amp / c(norm, 0.0) - expected).norm() < 1e-10,
                    "n={n} idx={idx}"
                );
            }
        }
    }

    #[test]
    fn single_site_amplitude_selects_entry() {
        // One site with delta-weight matrices: amplitude = chosen entry.
        let m0 = DMatrix::from_row_slice(1, 1, &[c(0.7, 0.0)]);
        let m1 = DMatrix::from_row_slice(1, 1, &[c(0.0, 0.3)]);
        let set = MpsTensorSet::new(
            vec![m0, m1],
            DVector::from_vec(vec![c(1.0, 0.0)]),
            DVector::from_vec(vec![c(1.0, 0.0)]),
        )
        .unwrap();
        assert!((set.amplitude(&[0]).unwrap() - c(0.7, 0.0)).norm() < 1e-14);
        assert!((set.amplitude(&[1]).unwrap() - c(0.0, 0.3)).norm() < 1e-14);
        assert!(set.amplitude(&[2]).is_err());
    }

    #[test]
    fn measured_operator_examples() {
        let tensors = MpsTensorSet::cluster();
        // phi = |0> gives A(0).
        let phi0 = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let a = tensors.measured_operator(&phi0).unwrap();
        assert!(proportional(&a, tensors.site_matrix(0)));
        // phi = |theta+>: proportional to H·diag(1, e^{-i theta}).
        let theta = 0.9;
        let a = tensors.measured_operator(&equatorial_vec(theta, false)).unwrap();
        let h = Unitary2::hadamard();
        let target = h.mul(&Unitary2::phase_gate(-theta));
        let target = DMatrix::from_fn(2, 2, |i, j| target.as_matrix()[(i, j)]);
        assert!(proportional(&a, &target));
        // sqrt(2)·A[phi] is unitary for every allowed outcome.
        for &theta in &ONEWAY_TARGET_ANGLES {
            for minus in [false, true] {
                let a = tensors
                    .measured_operator(&equatorial_vec(theta, minus))
                    .unwrap();
                let scaled = a.map(|v| v * c(std::f64::consts::SQRT_2, 0.0));
                let gram = &scaled * scaled.adjoint();
                let dev = (&gram - DMatrix::<C64>::identity(2, 2)).norm();
                assert!(dev < 1e-12);
            }
        }
    }

    #[test]
    fn correlation_sequence_examples() {
        let tensors = MpsTensorSet::cluster();
        let empty = tensors.correlation_sequence(&[]).unwrap();
        assert!((empty - DMatrix::<C64>::identity(2, 2)).norm() < 1e-14);
        let (t1, t2) = (0.4, -1.1);
        let seq = tensors
            .correlation_sequence(&[equatorial_vec(t1, false), equatorial_vec(t2, false)])
            .unwrap();
        let h = Unitary2::hadamard();
        let expect = h
            .mul(&Unitary2::phase_gate(-t2))
            .mul(&h)
            .mul(&Unitary2::phase_gate(-t1));
        let expect = DMatrix::from_fn(2, 2, |i, j| expect.as_matrix()[(i, j)]);
        assert!(proportional(&seq, &expect));
    }

    #[test]
    fn byproduct_examples() {
        let tensors = MpsTensorSet::cluster();
        let theta = std::f64::consts::FRAC_PI_4;
        let intended = tensors
            .measured_operator(&equatorial_vec(theta, false))
            .unwrap();
        let intended_unit = intended.map(|v| v * c(std::f64::consts::SQRT_2, 0.0));
        // Actual = intended: E = 1.
        let e = tensors
            .byproduct_of(&equatorial_vec(theta, false), &intended_unit)
            .unwrap();
        assert!(proportional(&e, &DMatrix::<C64>::identity(2, 2)));
        // Wrong outcome: E = X up to phase (A[theta-] = X·A[theta+]).
        let e = tensors
            .byproduct_of(&equatorial_vec(theta, true), &intended_unit)
            .unwrap();
        let x = pauli_dmatrices()[1].clone();
        assert!(proportional(&e, &x));
    }

    #[test]
    fn manageability_of_cluster_model() {
        let tensors = MpsTensorSet::cluster();
        let e_set = ByproductSet::pauli();
        let bases: Vec<MeasurementBasis> = ONEWAY_TARGET_ANGLES
            .iter()
            .map(|&t| MeasurementBasis::equatorial(t))
            .collect();
        let u_set: Vec<DMatrix<C64>> = ONEWAY_TARGET_ANGLES
            .iter()
            .map(|&t| {
                let u = Unitary2::hadamard().mul(&Unitary2::phase_gate(-t));
                DMatrix::from_fn(2, 2, |i, j| u.as_matrix()[(i, j)])
            })
            .collect();
        let cz = Unitary4::cz();
        let w = DMatrix::from_fn(4, 4, |i, j| cz.as_matrix()[(i, j)]);
        // Full angle lattice available as repairs.
        let all_bases: Vec<MeasurementBasis> = (0..8)
            .map(|k| MeasurementBasis::equatorial(std::f64::consts::FRAC_PI_4 * k as f64))
            .collect();
        let result = check_manageable(&tensors, &e_set, &u_set, &all_bases, &w).unwrap();
        assert!(result.holds(), "{result:?}");
        let _ = bases;
        // A trivial by-product set fails against real randomness.
        let only_id = ByproductSet {
            elements: vec![DMatrix::<C64>::identity(2, 2)],
        };
        let result = check_manageable(&tensors, &only_id, &u_set, &all_bases, &w).unwrap();
        assert!(!result.holds());
    }

    #[test]
    fn blind_criterion_for_oneway_angles() {
        let tensors = MpsTensorSet::cluster();
        let e_set = ByproductSet::pauli();
        let lattice: Vec<f64> = (0..8).map(|k| std::f64::consts::FRAC_PI_4 * k as f64).collect();
        let targets: Vec<MeasurementBasis> = ONEWAY_TARGET_ANGLES
            .iter()
            .map(|&t| MeasurementBasis::equatorial(t))
            .collect();
        let candidates: Vec<MeasurementBasis> =
            lattice.iter().map(|&t| MeasurementBasis::equatorial(t)).collect();
        let v_set: Vec<DMatrix<C64>> = lattice
            .iter()
            .map(|&g| {
                let v = z_rotation(-g).unwrap();
                DMatrix::from_fn(2, 2, |i, j| v.as_matrix()[(i, j)])
            })
            .collect();
        let result = check_blind_criterion(&tensors, &v_set, &targets, &candidates, &e_set).unwrap();
        let BlindCriterion::Holds { entries } = result else {
            panic!("one-way blindness table must exist");
        };
        // Every (target, sigma) has a choice, and choices exist for every
        // candidate basis (gamma is free), keeping the instruction uniform.
        for entry in &entries {
            assert!(!entry.choices.is_empty());
            let bases_used: std::collections::BTreeSet<usize> =
                entry.choices.iter().map(|(ci, _)| *ci).collect();
            assert_eq!(bases_used.len(), candidates.len(), "{entry:?}");
        }
    }

    #[test]
    fn substitution_examples() {
        // Same basis: identity up to per-outcome phases (here exactly 1).
        let b = MeasurementBasis::equatorial(0.3);
        let v = measurement_substitution(&b, &b).unwrap();
        assert!(proportional(&v, &DMatrix::<C64>::identity(2, 2)));
        // M_t1 -> M_t2 is the phase rotation by (t2 - t1) up to phase.
        let (t1, t2) = (0.25, 1.45);
        let v = measurement_substitution(
            &MeasurementBasis::equatorial(t1),
            &MeasurementBasis::equatorial(t2),
        )
        .unwrap();
        let target = Unitary2::phase_gate(t2 - t1);
        let target = DMatrix::from_fn(2, 2, |i, j| target.as_matrix()[(i, j)]);
        assert!(proportional(&v, &target));
        // Outcome-count mismatch is rejected.
        let d3 = MeasurementBasis::new(vec![
            DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]),
            DVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
            DVector::from_vec(vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]),
        ])
        .unwrap();
        assert!(measurement_substitution(&b, &d3).is_err());
    }

    #[test]
    fn substitution_preserves_outcome_distribution() {
        // Statevector oracle: measuring M_j after V equals measuring M_i.
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let (t1, t2) = (0.6, 2.0);
        let from = MeasurementBasis::equatorial(t1);
        let to = MeasurementBasis::equatorial(t2);
        let v = measurement_substitution(&from, &to).unwrap();
        let v2 = Unitary2::new(nalgebra::Matrix2::new(v[(0, 0)], v[(0, 1)], v[(1, 0)], v[(1, 1)])).unwrap();
        let trials = 1000;
        let mut direct = 0usize;
        let mut substituted = 0usize;
        for k in 0..trials {
            let psi = crate::linalg::haar_su2(&mut rng);
            let mut a = StateVector::zero_state(1).unwrap();
            a.apply_1q(0, &psi).unwrap();
            let mut b = a.clone();
            if a.measure_basis(0, &from, &mut rng).unwrap() == 0 {
                direct += 1;
            }
            b.apply_1q(0, &v2).unwrap();
            if b.measure_basis(0, &to, &mut rng).unwrap() == 0 {
                substituted += 1;
            }
            let _ = k;
        }
        let tv = (direct as f64 - substituted as f64).abs() / trials as f64;
        assert!(tv <= 0.03, "tv {tv}");
    }

    #[test]
    fn oneway_single_site_net_operator() {
        // By-product I branch: the net operator is H·diag(1, e^{-i alpha}).
        let alpha = std::f64::consts::FRAC_PI_4;
        for seed in 0..20u64 {
            let out = run_blind_oneway(
                &[alpha],
                OneWayMode::TableDriven,
                true,
                RunOptions::with_seed(seed),
            )
            .unwrap();
            let byproduct = out.byproduct.expect("always lands in the Pauli class");
            if byproduct == PauliLabel::I {
                let h = Unitary2::hadamard().mul(&Unitary2::phase_gate(-alpha));
                let target = DMatrix::from_fn(2, 2, |i, j| h.as_matrix()[(i, j)]);
                assert!(proportional(&out.realized, &target));
            }
        }
    }

    #[test]
    fn oneway_patterns_land_in_pauli_class() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..50 {
            let pattern: Vec<f64> = (0..4)
                .map(|_| ONEWAY_TARGET_ANGLES[rng.gen_range(0..4)])
                .collect();
            let mode = if trial % 2 == 0 {
                OneWayMode::Stochastic
            } else {
                OneWayMode::TableDriven
            };
            let out = run_blind_oneway(&pattern, mode, true, RunOptions::with_seed(rng.gen()))
                .unwrap();
            assert!(out.byproduct.is_some(), "trial {trial}: not Pauli-related");
        }
    }

    #[test]
    fn oneway_rejects_off_lattice_targets_in_discrete_mode() {
        let err = run_blind_oneway(&[0.3], OneWayMode::Stochastic, true, RunOptions::with_seed(1));
        assert!(matches!(err, Err(Error::AngleOutsideSet(_))));
    }

    #[test]
    fn byproduct_of_singular_operator_errors() {
        // Rank-deficient site matrices: measuring |1> induces the zero map.
        let m0 = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let m1 = DMatrix::zeros(2, 2);
        let set = MpsTensorSet::new(
            vec![m0, m1],
            DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]),
            DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]),
        )
        .unwrap();
        let phi1 = DVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let id = DMatrix::<C64>::identity(2, 2);
        assert!(matches!(
            set.byproduct_of(&phi1, &id),
            Err(Error::SingularOperator)
        ));
        assert!(set.check_unitary_outcomes(&[MeasurementBasis::computational()]).is_err());
    }

    #[test]
    fn manageable_witnesses_reverify_independently() {
        // Take the returned witnesses and multiply the inclusions out again.
        let tensors = MpsTensorSet::cluster();
        let e_set = ByproductSet::pauli();
        let bases: Vec<MeasurementBasis> = (0..8)
            .map(|k| MeasurementBasis::equatorial(std::f64::consts::FRAC_PI_4 * k as f64))
            .collect();
        let u_set: Vec<DMatrix<C64>> = ONEWAY_TARGET_ANGLES
            .iter()
            .map(|&t| {
                let u = Unitary2::hadamard().mul(&Unitary2::phase_gate(-t));
                DMatrix::from_fn(2, 2, |i, j| u.as_matrix()[(i, j)])
            })
            .collect();
        let cz = Unitary4::cz();
        let w = DMatrix::from_fn(4, 4, |i, j| cz.as_matrix()[(i, j)]);
        let Manageable::Holds { repair, coupling } =
            check_manageable(&tensors, &e_set, &u_set, &bases, &w).unwrap()
        else {
            panic!("cluster model is manageable");
        };
        for (uj, ei, mi) in &repair {
            for phi in bases[*mi].outcomes() {
                let a = tensors.measured_operator(phi).unwrap();
                let prod = &a * &e_set.elements()[*ei] * u_set[*uj].adjoint();
                assert!(e_set.contains(&prod));
            }
        }
        for ((i1, i2), (o1, o2)) in &coupling {
            let lhs = &w * e_set.elements()[*i1].kronecker(&e_set.elements()[*i2]);
            let rhs = e_set.elements()[*o1].kronecker(&e_set.elements()[*o2]) * &w;
            assert!(proportional(&lhs, &rhs));
        }
    }

    #[test]
    fn blind_witnesses_reverify_independently() {
        let tensors = MpsTensorSet::cluster();
        let e_set = ByproductSet::pauli();
        let lattice: Vec<f64> = (0..8).map(|k| std::f64::consts::FRAC_PI_4 * k as f64).collect();
        let targets: Vec<MeasurementBasis> = ONEWAY_TARGET_ANGLES
            .iter()
            .map(|&t| MeasurementBasis::equatorial(t))
            .collect();
        let candidates: Vec<MeasurementBasis> =
            lattice.iter().map(|&t| MeasurementBasis::equatorial(t)).collect();
        let v_set: Vec<DMatrix<C64>> = lattice
            .iter()
            .map(|&g| {
                let v = z_rotation(-g).unwrap();
                DMatrix::from_fn(2, 2, |i, j| v.as_matrix()[(i, j)])
            })
            .collect();
        let BlindCriterion::Holds { entries } =
            check_blind_criterion(&tensors, &v_set, &targets, &candidates, &e_set).unwrap()
        else {
            panic!("table exists");
        };
        for entry in entries.iter().take(4) {
            let sig = entry.sigma.matrix();
            let sig_dm = DMatrix::from_fn(2, 2, |i, j| sig.as_matrix()[(i, j)]);
            for &(ci, vi) in entry.choices.iter().take(3) {
                for phi_i in targets[entry.target].outcomes() {
                    let a_target = tensors.measured_operator(phi_i).unwrap();
                    for phi_j in candidates[ci].outcomes() {
                        let rotated = &sig_dm * v_set[vi].adjoint() * phi_j;
                        let norm = rotated.norm();
                        let rotated = rotated.map(|x| x / c(norm, 0.0));
                        let a = tensors.measured_operator(&rotated).unwrap();
                        assert!(e_set.contains(&(&a * a_target.adjoint())));
                    }
                }
            }
        }
    }

    #[test]
    fn oneway_instructed_angles_are_uniform_and_target_independent() {
        // gamma uniform makes the instructed angle uniform on the lattice,
        // whatever the pattern.
        use rand::SeedableRng;
        let runs = 600;
        let count = |pattern: &[f64], seed0: u64| {
            let mut counts = std::collections::BTreeMap::new();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed0);
            for _ in 0..runs {
                let out = run_blind_oneway(
                    pattern,
                    OneWayMode::TableDriven,
                    true,
                    RunOptions::with_seed(rand::Rng::gen(&mut rng)),
                )
                .unwrap();
                for &beta in &out.instructed_angles {
                    let k = (beta / std::f64::consts::FRAC_PI_4).round() as i64 % 8;
                    *counts.entry(k).or_insert(0usize) += 1;
                }
            }
            counts
        };
        let a = count(&[std::f64::consts::PI; 3], 5);
        let b = count(&[std::f64::consts::FRAC_PI_4; 3], 6);
        let total = (runs * 3) as f64;
        for k in 0..8i64 {
            let fa = *a.get(&k).unwrap_or(&0) as f64 / total;
            let fb = *b.get(&k).unwrap_or(&0) as f64 / total;
            assert!((fa - 0.125).abs() < 0.05, "angle {k}: {fa}");
            assert!((fa - fb).abs() < 0.07, "angle {k}: {fa} vs {fb}");
        }
    }

    #[test]
    fn mps_json_round_trip() {
        let t = MpsTensorSet::cluster();
        let text = t.to_json();
        let back = MpsTensorSet::from_json(&text).unwrap();
        assert_eq!(back.site_dim(), 2);
        for i in 0..2 {
            assert!((back.site_matrix(i) - t.site_matrix(i)).norm() < 1e-14);
        }
    }
}
