//! Blindness verification: the algebraic mixing identity, Haar-invariance
//! statistics, server-view indistinguishability across secret programs, and
//! the entangling-power certificate (schema `gtbqc-audit/1`).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{haar_su2, Unitary2, Unitary4};
use crate::pauli::PauliLabel;
use crate::program::CircuitProgram;
use crate::protocol::{run, CheatModel, RunOptions, Variant};
use crate::state::{prepare_phi_v, DensityMatrix};
use crate::transcript::SlotId;

pub const AUDIT_SCHEMA: &str = "gtbqc-audit/1";

/// One line of an audit report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Machine-readable audit output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema: String,
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn new(checks: Vec<AuditCheck>) -> Self {
        AuditReport {
            schema: AUDIT_SCHEMA.to_string(),
            checks,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Max-norm deviation of the four-term Pauli twirl average
/// sum_tau |Phi_{V tau}><Phi_{V tau}| / 4 from the maximally mixed state.
pub fn mixing_check(v: &Unitary2) -> f64 {
    let mut avg = DMatrix::<C64>::zeros(4, 4);
    for &tau in &PauliLabel::ALL {
        let state = prepare_phi_v(&v.mul(&tau.matrix()));
        let amps = state.amplitudes();
        for i in 0..4 {
            for j in 0..4 {
                avg[(i, j)] += amps[i] * amps[j].conj() * C64::new(0.25, 0.0);
            }
        }
    }
    DensityMatrix(avg).max_deviation_from_mixed()
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        // Advance both streams past a tied value before evaluating.
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Total-variation distance between two categorical count maps.
pub fn tv_distance(a: &BTreeMap<usize, usize>, b: &BTreeMap<usize, usize>) -> f64 {
    let na: f64 = a.values().sum::<usize>() as f64;
    let nb: f64 = b.values().sum::<usize>() as f64;
    if na == 0.0 || nb == 0.0 {
        return if na == nb { 0.0 } else { 1.0 };
    }
    let keys: std::collections::BTreeSet<usize> = a.keys().chain(b.keys()).copied().collect();
    0.5 * keys
        .into_iter()
        .map(|k| {
            let pa = *a.get(&k).unwrap_or(&0) as f64 / na;
            let pb = *b.get(&k).unwrap_or(&0) as f64 / nb;
            (pa - pb).abs()
        })
        .sum::<f64>()
}

/// Report of the Haar-invariance comparison.
#[derive(Clone, Debug, Serialize)]
pub struct HaarInvarianceReport {
    pub samples: usize,
    pub ks: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Compare the distribution of |tr R| for R = tau·U·sigma·V† between two
/// intended gates. With V Haar the masked instruction is Haar however the
/// gate was chosen, so the distributions must agree; a fixed V breaks this.
///
/// The documented feature is |tr R|; full distribution equality on SU(2) is
/// out of reach of a finite test.
pub fn haar_invariance_check(
    u1: &Unitary2,
    u1_alt: &Unitary2,
    n_samples: usize,
    seed: u64,
    fixed_v: Option<&Unitary2>,
    threshold: f64,
) -> Result<HaarInvarianceReport> {
    if n_samples < 10_000 {
        return Err(Error::InsufficientSamples {
            needed: 10_000,
            got: n_samples,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = |u: &Unitary2, rng: &mut ChaCha8Rng| -> f64 {
        let v = match fixed_v {
            Some(v) => v.clone(),
            None => haar_su2(rng),
        };
        let tau = PauliLabel::ALL[rng.gen_range(0..4)].matrix();
        let sigma = PauliLabel::ALL[rng.gen_range(0..4)].matrix();
        let r = tau.mul(u).mul(&sigma).mul(&v.adjoint());
        r.trace().norm()
    };
    let a: Vec<f64> = (0..n_samples).map(|_| sample(u1, &mut rng)).collect();
    let b: Vec<f64> = (0..n_samples).map(|_| sample(u1_alt, &mut rng)).collect();
    let ks = ks_distance(&a, &b);
    Ok(HaarInvarianceReport {
        samples: n_samples,
        ks,
        threshold,
        pass: ks < threshold,
    })
}

/// One party's view of one slot, aggregated over runs.
#[derive(Clone, Debug)]
pub struct ViewSample {
    pub slot: SlotId,
    /// Classical instruction index counts (server-visible).
    pub instruction_counts: BTreeMap<usize, usize>,
    /// Average received-pair state at this slot, as the exact mixture over
    /// the secret twirl when one is applied.
    pub average_pair: DMatrix<C64>,
    pub runs: usize,
}

/// Settings for the indistinguishability audit.
#[derive(Clone, Debug)]
pub struct ViewOptions {
    pub variant: Variant,
    pub runs: usize,
    pub seed: u64,
    pub disable_tau_twirl: bool,
    pub classical_tv_threshold: f64,
    pub quantum_td_threshold: f64,
}

/// Per-slot distances between the server views of two equal-shape programs.
#[derive(Clone, Debug, Serialize)]
pub struct ViewReport {
    pub runs: usize,
    pub per_slot_classical_tv: Vec<(SlotId, f64)>,
    pub per_slot_quantum_td: Vec<(SlotId, f64)>,
    pub max_classical_tv: f64,
    pub max_quantum_td: f64,
    pub classical_pass: bool,
    pub quantum_pass: bool,
}

impl ViewReport {
    pub fn pass(&self) -> bool {
        self.classical_pass && self.quantum_pass
    }
}

fn pair_density(v: &nalgebra::Matrix2<C64>) -> Result<DMatrix<C64>> {
    let state = prepare_phi_v(&Unitary2::new(*v)?);
    let amps = state.amplitudes();
    let mut rho = DMatrix::<C64>::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            rho[(i, j)] = amps[i] * amps[j].conj();
        }
    }
    Ok(rho)
}

fn collect_views(
    program: &CircuitProgram,
    opts: &ViewOptions,
    seed_offset: u64,
) -> Result<BTreeMap<(usize, usize, bool), ViewSample>> {
    let mut slots: BTreeMap<(usize, usize, bool), ViewSample> = BTreeMap::new();
    let mixed = DMatrix::<C64>::identity(4, 4).map(|v| v * C64::new(0.25, 0.0));
    for r in 0..opts.runs {
        let mut options = RunOptions::with_seed(opts.seed ^ seed_offset ^ ((r as u64) << 16));
        options.measure_outputs = false;
        options.disable_tau_twirl = opts.disable_tau_twirl;
        let outcome = run(opts.variant, program, CheatModel::Honest, options)?;
        for record in &outcome.slot_records {
            let key = (record.slot.layer, record.slot.qubit, record.slot.two_qubit);
            let entry = slots.entry(key).or_insert_with(|| ViewSample {
                slot: record.slot,
                instruction_counts: BTreeMap::new(),
                average_pair: DMatrix::zeros(4, 4),
                runs: 0,
            });
            entry.runs += 1;
            if let Some(idx) = record.instruction_index {
                *entry.instruction_counts.entry(idx).or_insert(0) += 1;
            }
            // Per-run contribution: the exact twirl mixture when a secret
            // Pauli was applied (the four-term identity), else the actual
            // pair state. Averaged over this slot's sent pairs.
            let mut contribution = DMatrix::<C64>::zeros(4, 4);
            for sent in &record.sent {
                if record.twirled {
                    contribution += &mixed;
                } else {
                    contribution += pair_density(sent)?;
                }
            }
            let k = record.sent.len().max(1) as f64;
            entry.average_pair += contribution.map(|v| v / C64::new(k, 0.0));
        }
    }
    for sample in slots.values_mut() {
        let r = sample.runs.max(1) as f64;
        sample.average_pair = sample.average_pair.map(|v| v / C64::new(r, 0.0));
    }
    Ok(slots)
}

/// Run two equal-shape programs many times under an honest server and
/// measure how far apart the server views are, per slot: total variation
/// over classical instruction indices and trace distance between average
/// received-pair states.
pub fn view_indistinguishability(
    program_a: &CircuitProgram,
    program_b: &CircuitProgram,
    opts: &ViewOptions,
) -> Result<ViewReport> {
    if program_a.shape() != program_b.shape() {
        return Err(Error::ShapeMismatch);
    }
    let views_a = collect_views(program_a, opts, 0x5eed_a000)?;
    let views_b = collect_views(program_b, opts, 0x5eed_b000)?;
    let mut per_slot_classical_tv = Vec::new();
    let mut per_slot_quantum_td = Vec::new();
    for (key, a) in &views_a {
        let Some(b) = views_b.get(key) else {
            return Err(Error::ShapeMismatch);
        };
        if !a.instruction_counts.is_empty() || !b.instruction_counts.is_empty() {
            per_slot_classical_tv
                .push((a.slot, tv_distance(&a.instruction_counts, &b.instruction_counts)));
        }
        let td = DensityMatrix(a.average_pair.clone())
            .trace_distance(&DensityMatrix(b.average_pair.clone()));
        per_slot_quantum_td.push((a.slot, td));
    }
    let max_classical_tv = per_slot_classical_tv
        .iter()
        .map(|(_, d)| *d)
        .fold(0.0, f64::max);
    let max_quantum_td = per_slot_quantum_td
        .iter()
        .map(|(_, d)| *d)
        .fold(0.0, f64::max);
    Ok(ViewReport {
        runs: opts.runs,
        classical_pass: max_classical_tv < opts.classical_tv_threshold,
        quantum_pass: max_quantum_td < opts.quantum_td_threshold,
        per_slot_classical_tv,
        per_slot_quantum_td,
        max_classical_tv,
        max_quantum_td,
    })
}

/// Local-equivalence class of a two-qubit gate.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateClass {
    Product,
    IdentityEquivalent,
    CnotEquivalent,
    OtherEntangling,
}

/// Operator-Schmidt and local-invariant data for a two-qubit gate.
#[derive(Clone, Debug, Serialize)]
pub struct EntanglingCertificate {
    pub schmidt_values: [f64; 4],
    pub schmidt_rank: usize,
    #[serde(serialize_with = "crate::transcript::serialize_c64")]
    pub g1: C64,
    pub g2: f64,
    pub class: GateClass,
}

impl EntanglingCertificate {
    pub fn is_entangling(&self) -> bool {
        self.schmidt_rank > 1
    }
}

fn magic_basis() -> Matrix4<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    let r = C64::new(s, 0.0);
    let i = C64::new(0.0, s);
    Matrix4::new(
        r, z, z, i, //
        z, i, r, z, //
        z, i, -r, z, //
        r, z, z, -i,
    )
}

/// Operator-Schmidt rank plus the Makhlin-style local invariants, enough to
/// decide product vs entangling and CNOT-class membership. Invariant under
/// single-qubit dressings on either side.
pub fn entangling_certificate(g: &Unitary4) -> EntanglingCertificate {
    let m = g.as_matrix();
    // Reshuffle: R[(a,a'),(b,b')] = g[(a,b),(a',b')]; singular values give
    // the operator-Schmidt coefficients.
    let mut reshuffled = Matrix4::<C64>::zeros();
    for a in 0..2 {
        for ap in 0..2 {
            for b in 0..2 {
                for bp in 0..2 {
                    reshuffled[(2 * a + ap, 2 * b + bp)] = m[(2 * a + b, 2 * ap + bp)];
                }
            }
        }
    }
    let svd = nalgebra::SVD::new(
        DMatrix::from_fn(4, 4, |i, j| reshuffled[(i, j)]),
        false,
        false,
    );
    let mut schmidt_values = [0.0f64; 4];
    for (k, s) in svd.singular_values.iter().enumerate().take(4) {
        schmidt_values[k] = *s;
    }
    let max_s = schmidt_values.iter().cloned().fold(0.0, f64::max);
    let schmidt_rank = schmidt_values.iter().filter(|&&s| s > 1e-9 * max_s.max(1.0)).count();

    let q = magic_basis();
    let mm = q.adjoint() * m * q;
    let prod = mm.transpose() * mm;
    let tr = prod.trace();
    let tr2 = (prod * prod).trace();
    let det = g.determinant();
    let g1 = tr * tr / (det * C64::new(16.0, 0.0));
    let g2 = ((tr * tr - tr2) / (det * C64::new(4.0, 0.0))).re;

    let near = |x: C64, re: f64| (x - C64::new(re, 0.0)).norm() < 1e-9;
    let class = if schmidt_rank == 1 {
        GateClass::Product
    } else if near(g1, 0.0) && (g2 - 1.0).abs() < 1e-9 {
        GateClass::CnotEquivalent
    } else if near(g1, 1.0) && (g2 - 3.0).abs() < 1e-9 {
        GateClass::IdentityEquivalent
    } else {
        GateClass::OtherEntangling
    };
    EntanglingCertificate {
        schmidt_values,
        schmidt_rank,
        g1,
        g2,
        class,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::entangle_choice_gate;
    use crate::linalg::{x_rotation, z_rotation};

    #[test]
    fn mixing_identity_exact() {
        assert!(mixing_check(&Unitary2::identity()) < 1e-12);
        let hz = Unitary2::hadamard().mul(&z_rotation(std::f64::consts::FRAC_PI_4).unwrap());
        assert!(mixing_check(&hz) < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            assert!(mixing_check(&haar_su2(&mut rng)) < 1e-12);
        }
    }

    #[test]
    fn ks_distance_basics() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        assert!(ks_distance(&a, &a) < 1e-12);
        let b: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
        assert!(ks_distance(&a, &b) > 0.45);
    }

    #[test]
    fn haar_invariance_identical_gates_within_noise() {
        let report = haar_invariance_check(
            &Unitary2::hadamard(),
            &Unitary2::hadamard(),
            20_000,
            7,
            None,
            0.02,
        )
        .unwrap();
        assert!(report.ks < 0.02, "ks = {}", report.ks);
    }

    #[test]
    fn haar_invariance_holds_and_negative_control_fails() {
        let report = haar_invariance_check(
            &Unitary2::identity(),
            &Unitary2::hadamard(),
            20_000,
            424242,
            None,
            0.02,
        )
        .unwrap();
        assert!(report.pass, "ks = {}", report.ks);
        let fixed = haar_invariance_check(
            &Unitary2::identity(),
            &Unitary2::hadamard(),
            20_000,
            424242,
            Some(&Unitary2::identity()),
            0.02,
        )
        .unwrap();
        assert!(!fixed.pass, "fixed-V ks = {}", fixed.ks);
        assert!(matches!(
            haar_invariance_check(&Unitary2::identity(), &Unitary2::identity(), 10, 0, None, 0.02),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn identical_programs_are_indistinguishable_and_shape_mismatch_rejected() {
        use crate::program::{CircuitProgram, EntangleChoice, GateRequest, Layer};
        let program = CircuitProgram {
            num_qubits: 2,
            layers: vec![Layer {
                gates: vec![GateRequest::Idx(2), GateRequest::Idx(6)],
                entangles: vec![EntangleChoice::Entangle],
            }],
        };
        let opts = ViewOptions {
            variant: Variant::TrapFree,
            runs: 1500,
            seed: 77,
            disable_tau_twirl: false,
            classical_tv_threshold: 0.08,
            quantum_td_threshold: 1e-12,
        };
        let report = view_indistinguishability(&program, &program, &opts).unwrap();
        assert!(report.pass(), "{report:?}");

        let mut other_shape = program.clone();
        other_shape.layers[0].gates[0] = GateRequest::Identity;
        assert!(matches!(
            view_indistinguishability(&program, &other_shape, &opts),
            Err(crate::error::Error::ShapeMismatch)
        ));
    }

    #[test]
    fn certificate_examples() {
        // R(1) is a product gate.
        let r_id = Unitary4::sandwich(&Unitary4::cz(), &Unitary2::identity());
        let cert = entangling_certificate(&r_id);
        assert_eq!(cert.class, GateClass::Product);
        assert_eq!(cert.schmidt_rank, 1);

        // R(S) is entangling and CNOT-equivalent.
        let r_s = Unitary4::sandwich(&Unitary4::cz(), &entangle_choice_gate());
        let cert = entangling_certificate(&r_s);
        assert!(cert.is_entangling());
        assert_eq!(cert.class, GateClass::CnotEquivalent);

        // CZ and CNOT are in the same class.
        assert_eq!(entangling_certificate(&Unitary4::cz()).class, GateClass::CnotEquivalent);
        assert_eq!(entangling_certificate(&Unitary4::cnot()).class, GateClass::CnotEquivalent);

        // A quarter-turn controlled phase is entangling but not CNOT-class.
        let csz = Unitary4::controlled_phase(std::f64::consts::FRAC_PI_2);
        let cert = entangling_certificate(&csz);
        assert!(cert.is_entangling());
        assert_eq!(cert.class, GateClass::OtherEntangling);
    }

    #[test]
    fn certificate_invariant_under_local_dressing() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let base = Unitary4::sandwich(&Unitary4::cz(), &entangle_choice_gate());
        let base_cert = entangling_certificate(&base);
        for _ in 0..100 {
            let (a, b, c, d) = (
                haar_su2(&mut rng),
                haar_su2(&mut rng),
                haar_su2(&mut rng),
                haar_su2(&mut rng),
            );
            let dressed = a.kron(&b).mul(&base).mul(&c.kron(&d));
            let cert = entangling_certificate(&dressed);
            assert_eq!(cert.class, base_cert.class);
            assert!((cert.g2 - base_cert.g2).abs() < 1e-8);
            for k in 0..4 {
                assert!((cert.schmidt_values[k] - base_cert.schmidt_values[k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn x_quarter_rotation_sandwich_is_not_cnot_class() {
        // The eighth-turn X rotation spreads to an entangling gate short of
        // the CNOT class; the half-turn (the configured choice gate) hits it.
        let r = Unitary4::sandwich(
            &Unitary4::cz(),
            &x_rotation(-std::f64::consts::FRAC_PI_4).unwrap(),
        );
        let cert = entangling_certificate(&r);
        assert!(cert.is_entangling());
        assert_eq!(cert.class, GateClass::OtherEntangling);
    }
}
