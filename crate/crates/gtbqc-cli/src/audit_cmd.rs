//! The `audit` subcommand: drive the blindness checks from a config file and
//! emit a machine-readable report.

use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;

use gtbqc::audit::{
    entangling_certificate, haar_invariance_check, mixing_check, view_indistinguishability,
    AuditCheck, AuditReport, GateClass, ViewOptions,
};
use gtbqc::frame::entangle_choice_gate;
use gtbqc::linalg::{haar_su2, Unitary2, Unitary4};
use gtbqc::program::CircuitProgram;
use gtbqc::protocol::Variant;

use crate::{read_file, write_file, CliError};

#[derive(Args)]
pub struct AuditArgs {
    /// Audit config file (JSON list of checks).
    #[arg(long)]
    config: PathBuf,
    /// Where to write the gtbqc-audit/1 report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct AuditFile {
    checks: Vec<CheckSpec>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CheckSpec {
    /// Max twirl-average deviation over `samples` random gates.
    Mixing { samples: usize, seed: u64 },
    /// KS distance between masked-instruction features of two gates.
    HaarInvariance {
        samples: usize,
        seed: u64,
        #[serde(default = "default_ks_threshold")]
        threshold: f64,
    },
    /// Server-view distances between two equal-shape programs.
    View {
        variant: String,
        runs: usize,
        seed: u64,
        program_a: PathBuf,
        program_b: PathBuf,
        #[serde(default = "default_tv_threshold")]
        classical_threshold: f64,
        #[serde(default = "default_td_threshold")]
        quantum_threshold: f64,
    },
    /// Certify the two spread gates: identity choice product, entangling
    /// choice CNOT-class.
    Certificate,
}

fn default_ks_threshold() -> f64 {
    0.02
}
fn default_tv_threshold() -> f64 {
    0.02
}
fn default_td_threshold() -> f64 {
    1e-12
}

pub fn execute(args: AuditArgs) -> Result<(), CliError> {
    let file: AuditFile = serde_json::from_str(&read_file(&args.config)?)
        .map_err(|e| CliError::Config(format!("audit config {}: {e}", args.config.display())))?;
    let mut checks = Vec::new();
    for spec in file.checks {
        match spec {
            CheckSpec::Mixing { samples, seed } => {
                let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
                let mut worst: f64 = 0.0;
                for _ in 0..samples.max(1) {
                    worst = worst.max(mixing_check(&haar_su2(&mut rng)));
                }
                checks.push(AuditCheck {
                    name: format!("mixing[{samples}]"),
                    statistic: worst,
                    threshold: 1e-12,
                    pass: worst < 1e-12,
                });
            }
            CheckSpec::HaarInvariance {
                samples,
                seed,
                threshold,
            } => {
                let report = haar_invariance_check(
                    &Unitary2::identity(),
                    &Unitary2::hadamard(),
                    samples,
                    seed,
                    None,
                    threshold,
                )?;
                checks.push(AuditCheck {
                    name: format!("haar_invariance[{samples}]"),
                    statistic: report.ks,
                    threshold,
                    pass: report.pass,
                });
            }
            CheckSpec::View {
                variant,
                runs,
                seed,
                program_a,
                program_b,
                classical_threshold,
                quantum_threshold,
            } => {
                let variant = Variant::parse(&variant)
                    .ok_or_else(|| CliError::Config(format!("unknown variant '{variant}'")))?;
                let a = CircuitProgram::from_json(&read_file(&program_a)?)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                let b = CircuitProgram::from_json(&read_file(&program_b)?)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                let report = view_indistinguishability(
                    &a,
                    &b,
                    &ViewOptions {
                        variant,
                        runs,
                        seed,
                        disable_tau_twirl: false,
                        classical_tv_threshold: classical_threshold,
                        quantum_td_threshold: quantum_threshold,
                    },
                )?;
                checks.push(AuditCheck {
                    name: format!("view_classical[{runs}]"),
                    statistic: report.max_classical_tv,
                    threshold: classical_threshold,
                    pass: report.classical_pass,
                });
                checks.push(AuditCheck {
                    name: format!("view_quantum[{runs}]"),
                    statistic: report.max_quantum_td,
                    threshold: quantum_threshold,
                    pass: report.quantum_pass,
                });
            }
            CheckSpec::Certificate => {
                let r_id = Unitary4::sandwich(&Unitary4::cz(), &Unitary2::identity());
                let id_cert = entangling_certificate(&r_id);
                checks.push(AuditCheck {
                    name: "certificate_identity_choice".into(),
                    statistic: id_cert.schmidt_rank as f64,
                    threshold: 1.0,
                    pass: id_cert.class == GateClass::Product,
                });
                let r_s = Unitary4::sandwich(&Unitary4::cz(), &entangle_choice_gate());
                let s_cert = entangling_certificate(&r_s);
                checks.push(AuditCheck {
                    name: "certificate_entangle_choice".into(),
                    statistic: s_cert.schmidt_rank as f64,
                    threshold: 2.0,
                    pass: s_cert.class == GateClass::CnotEquivalent,
                });
            }
        }
    }
    let report = AuditReport::new(checks);
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{text}");
    if let Some(out) = &args.out {
        write_file(out, &text)?;
    }
    if report.all_pass() {
        Ok(())
    } else {
        Err(CliError::CriterionFailed("an audit check failed".into()))
    }
}
