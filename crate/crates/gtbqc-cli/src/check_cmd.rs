//! The `check` subcommand: run the commutation and substitution decision
//! procedures over a gate-set file and print the witness tables.

use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;

use gtbqc::frame::{
    build_substitution_table, check_one_qubit_commutation, check_two_qubit_commutation,
    clifford_z_set, eighth_turn_gates, eighth_turn_rotations, OneQubitCommutation,
    TwoQubitCommutation,
};
use gtbqc::linalg::{Unitary2, Unitary4};
use gtbqc::pauli::PauliLabel;

use crate::{read_file, write_file, CliError};

#[derive(Args)]
pub struct CheckArgs {
    /// Gate-set file (JSON with optional "w", "v_set", "u_set" matrices).
    #[arg(long)]
    sets: Option<PathBuf>,
    /// Named preset instead of a file: clifford | trapfree.
    #[arg(long)]
    preset: Option<String>,
    /// Also write the report to a file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct SetsFile {
    /// 4x4 coupling, entries as [re, im].
    w: Option<Vec<Vec<[f64; 2]>>>,
    v_set: Option<Vec<Vec<Vec<[f64; 2]>>>>,
    u_set: Option<Vec<Vec<Vec<[f64; 2]>>>>,
}

fn parse_2x2(data: &[Vec<[f64; 2]>]) -> Result<Unitary2, CliError> {
    if data.len() != 2 || data.iter().any(|r| r.len() != 2) {
        return Err(CliError::Config("expected a 2x2 matrix".into()));
    }
    let c = |e: [f64; 2]| num_complex::Complex64::new(e[0], e[1]);
    Unitary2::new(nalgebra::Matrix2::new(
        c(data[0][0]),
        c(data[0][1]),
        c(data[1][0]),
        c(data[1][1]),
    ))
    .map_err(|e| CliError::Config(e.to_string()))
}

fn parse_4x4(data: &[Vec<[f64; 2]>]) -> Result<Unitary4, CliError> {
    if data.len() != 4 || data.iter().any(|r| r.len() != 4) {
        return Err(CliError::Config("expected a 4x4 matrix".into()));
    }
    let c = |e: [f64; 2]| num_complex::Complex64::new(e[0], e[1]);
    let mut m = nalgebra::Matrix4::zeros();
    for (i, row) in data.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            m[(i, j)] = c(*e);
        }
    }
    Unitary4::new(m).map_err(|e| CliError::Config(e.to_string()))
}

struct Inputs {
    w: Option<Unitary4>,
    v_set: Option<Vec<Unitary2>>,
    u_set: Option<Vec<Unitary2>>,
}

fn load_inputs(args: &CheckArgs) -> Result<Inputs, CliError> {
    if let Some(preset) = &args.preset {
        return match preset.as_str() {
            "clifford" => Ok(Inputs {
                w: Some(Unitary4::cz()),
                v_set: Some(clifford_z_set()),
                u_set: None,
            }),
            "trapfree" => Ok(Inputs {
                w: Some(Unitary4::cz()),
                v_set: Some(eighth_turn_rotations()),
                u_set: Some(eighth_turn_gates()),
            }),
            other => Err(CliError::Config(format!("unknown preset '{other}'"))),
        };
    }
    let path = args
        .sets
        .as_ref()
        .ok_or_else(|| CliError::Config("either --sets or --preset is required".into()))?;
    let file: SetsFile = serde_json::from_str(&read_file(path)?)
        .map_err(|e| CliError::Config(format!("sets {}: {e}", path.display())))?;
    let w = file.w.as_deref().map(parse_4x4).transpose()?;
    let v_set = file
        .v_set
        .map(|vs| vs.iter().map(|m| parse_2x2(m)).collect::<Result<Vec<_>, _>>())
        .transpose()?;
    let u_set = file
        .u_set
        .map(|us| us.iter().map(|m| parse_2x2(m)).collect::<Result<Vec<_>, _>>())
        .transpose()?;
    Ok(Inputs { w, v_set, u_set })
}

pub fn execute(args: CheckArgs) -> Result<(), CliError> {
    let inputs = load_inputs(&args)?;
    let mut report = String::new();
    let mut all_pass = true;

    if let Some(w) = &inputs.w {
        match check_two_qubit_commutation(w) {
            TwoQubitCommutation::Holds { witnesses } => {
                report.push_str("two-qubit criterion: PASS\n");
                for wit in witnesses {
                    report.push_str(&format!(
                        "  {} (x) {}  ->  {} (x) {}   phase {:+.0}{:+.0}i\n",
                        wit.input.0, wit.input.1, wit.output.0, wit.output.1,
                        wit.phase.re, wit.phase.im
                    ));
                }
            }
            TwoQubitCommutation::Fails { counterexample } => {
                all_pass = false;
                report.push_str(&format!(
                    "two-qubit criterion: FAIL\n  counterexample: no Pauli pair matches W·({} (x) {})·W†\n",
                    counterexample.0, counterexample.1
                ));
            }
        }
    }

    if let Some(v_set) = &inputs.v_set {
        match check_one_qubit_commutation(v_set) {
            OneQubitCommutation::Holds { witnesses } => {
                report.push_str("one-qubit criterion: PASS\n");
                for wit in witnesses {
                    report.push_str(&format!(
                        "  V[{}]·{} = {}·V[{}]   phase {:+.2}{:+.2}i\n",
                        wit.v_index, wit.sigma, wit.sigma_out, wit.v_out,
                        wit.phase.re, wit.phase.im
                    ));
                }
            }
            OneQubitCommutation::Fails { v_index, sigma } => {
                all_pass = false;
                report.push_str(&format!(
                    "one-qubit criterion: FAIL\n  counterexample: V[{v_index}]·{sigma} leaves the set\n"
                ));
            }
        }
    }

    if let (Some(u_set), Some(v_set)) = (&inputs.u_set, &inputs.v_set) {
        match build_substitution_table(u_set, v_set) {
            Ok(table) => {
                report.push_str("substitution table: PASS\n");
                for i in 0..u_set.len() {
                    for j in 0..u_set.len() {
                        for sigma in PauliLabel::ALL {
                            let e = table.lookup(i, j, sigma).expect("table is total");
                            report.push_str(&format!(
                                "  (i={i}, j={j}, {sigma}) -> instruct U[{}], net {}·U[{i}], phase {:+.0}{:+.0}i\n",
                                e.u_out, e.sigma_out, e.phase.re, e.phase.im
                            ));
                        }
                    }
                }
            }
            Err(e) => {
                all_pass = false;
                report.push_str(&format!("substitution table: FAIL\n  {e}\n"));
            }
        }
    }

    print!("{report}");
    if let Some(out) = &args.out {
        write_file(out, &report)?;
    }
    if all_pass {
        Ok(())
    } else {
        Err(CliError::CriterionFailed("a checked criterion failed".into()))
    }
}
