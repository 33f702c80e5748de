//! End-to-end CLI tests: determinism of `run` outputs (acceptance criterion
//! for the transcript contract), exit codes and the check/audit flows.

use std::path::Path;
use std::process::{Command, Output};

fn gtbqc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gtbqc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_string_lossy().into_owned()
}

const PROGRAM: &str = r#"{
  "num_qubits": 2,
  "layers": [
    { "gates": [{"idx": 0}, {"idx": 3}], "entangles": ["entangle"] },
    { "gates": [{"idx": 5}, "identity"], "entangles": [] }
  ]
}"#;

/// Same shape with indices valid for the three-gate variants.
const SMALL_PROGRAM: &str = r#"{
  "num_qubits": 2,
  "layers": [
    { "gates": [{"idx": 0}, {"idx": 1}], "entangles": ["entangle"] },
    { "gates": [{"idx": 2}, "identity"], "entangles": [] }
  ]
}"#;

#[test]
fn run_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let program = write(tmp.path(), "prog.json", PROGRAM);
    for pass in ["a", "b"] {
        let out = gtbqc(
            &[
                "run",
                "--variant",
                "trapfree",
                "--program",
                &program,
                "--seed",
                "42",
                "--out",
                pass,
            ],
            tmp.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(tmp.path().join("a/transcript.jsonl")).unwrap();
    let b = std::fs::read(tmp.path().join("b/transcript.jsonl")).unwrap();
    assert_eq!(a, b, "criterion: identical seeds must give identical bytes");
    println!("criterion 11 (cli) PASS — byte-identical transcripts");

    let c = gtbqc(
        &[
            "run", "--variant", "trapfree", "--program", &program, "--seed", "43", "--out", "c",
        ],
        tmp.path(),
    );
    assert!(c.status.success());
    let c = std::fs::read(tmp.path().join("c/transcript.jsonl")).unwrap();
    assert_ne!(a, c, "different seeds must differ");
}

#[test]
fn run_reports_summary_statistics() {
    let tmp = tempfile::tempdir().unwrap();
    let program = write(tmp.path(), "prog.json", SMALL_PROGRAM);
    let out = gtbqc(
        &[
            "run",
            "--variant",
            "stochastic",
            "--program",
            &program,
            "--seed",
            "7",
            "--shots",
            "40",
            "--out",
            "out",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/summary.json")).unwrap())
            .unwrap();
    assert!(summary["min_fidelity"].as_f64().unwrap() > 1.0 - 1e-9);
    let mean = summary["mean_attempts"].as_f64().unwrap();
    assert!((2.0..7.0).contains(&mean), "mean attempts {mean}");
}

#[test]
fn run_with_traps_and_cheat_reports_detection() {
    let tmp = tempfile::tempdir().unwrap();
    let program = write(tmp.path(), "prog.json", PROGRAM);
    let out = gtbqc(
        &[
            "run",
            "--variant",
            "trapfree",
            "--program",
            &program,
            "--seed",
            "11",
            "--shots",
            "60",
            "--traps",
            "0.5",
            "--cheat",
            "measure-pairs",
            "--out",
            "out",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/summary.json")).unwrap())
            .unwrap();
    let rate = summary["trap_detection"]["rate"].as_f64().unwrap();
    assert!(rate > 0.0, "cheating server went undetected");
}

#[test]
fn config_file_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let program = write(tmp.path(), "prog.json", SMALL_PROGRAM);
    let config = write(
        tmp.path(),
        "cfg.json",
        &format!(r#"{{ "variant": "clifford", "seed": 5, "program": "{program}" }}"#),
    );
    // Flag says trapfree, config wins with clifford.
    let out = gtbqc(
        &[
            "run", "--variant", "trapfree", "--seed", "9", "--config", &config, "--out", "out",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let transcript = std::fs::read_to_string(tmp.path().join("out/transcript.jsonl")).unwrap();
    assert!(transcript.lines().next().unwrap().contains("\"clifford\""));
}

#[test]
fn exit_codes_are_stable() {
    let tmp = tempfile::tempdir().unwrap();
    // 2: config error (missing program).
    let out = gtbqc(&["run", "--variant", "trapfree", "--seed", "1"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    // 2: parse error in the program file.
    let bad = write(tmp.path(), "bad.json", "{ not json");
    let out = gtbqc(
        &["run", "--variant", "trapfree", "--program", &bad, "--seed", "1"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    // 4: unreadable program path.
    let out = gtbqc(
        &["run", "--variant", "trapfree", "--program", "missing.json", "--seed", "1"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(4));
    // 5: insufficient samples for a haar-invariance audit.
    let audit = write(
        tmp.path(),
        "audit.json",
        r#"{ "checks": [ { "kind": "haar_invariance", "samples": 10, "seed": 1 } ] }"#,
    );
    let out = gtbqc(&["audit", "--config", &audit], tmp.path());
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn check_presets() {
    let tmp = tempfile::tempdir().unwrap();
    // The clifford preset passes and prints witnesses.
    let out = gtbqc(&["check", "--preset", "clifford"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("two-qubit criterion: PASS"));
    assert!(text.contains("one-qubit criterion: PASS"));

    // The trapfree preset prints the full substitution table.
    let out = gtbqc(&["check", "--preset", "trapfree"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("substitution table: PASS"));
    assert!(text.matches("-> instruct U[").count() == 8 * 8 * 4);
}

#[test]
fn check_rejects_quarter_turn_coupling() {
    let tmp = tempfile::tempdir().unwrap();
    // W = controlled-sqrt(Z): diag(1, 1, 1, i).
    let sets = write(
        tmp.path(),
        "sets.json",
        r#"{
  "w": [
    [[1,0],[0,0],[0,0],[0,0]],
    [[0,0],[1,0],[0,0],[0,0]],
    [[0,0],[0,0],[1,0],[0,0]],
    [[0,0],[0,0],[0,0],[0,1]]
  ],
  "v_set": [
    [[[0.7071067811865476,0],[0.7071067811865476,0]],[[0.7071067811865476,0],[-0.7071067811865476,0]]]
  ]
}"#,
    );
    let out = gtbqc(&["check", "--sets", &sets], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("two-qubit criterion: FAIL"));
    assert!(text.contains("counterexample"));
}

#[test]
fn audit_runs_configured_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let prog_a = write(
        tmp.path(),
        "a.json",
        r#"{ "num_qubits": 2, "layers": [ { "gates": [{"idx":0},{"idx":1}], "entangles": ["entangle"] } ] }"#,
    );
    let prog_b = write(
        tmp.path(),
        "b.json",
        r#"{ "num_qubits": 2, "layers": [ { "gates": [{"idx":7},{"idx":4}], "entangles": ["identity"] } ] }"#,
    );
    let audit = write(
        tmp.path(),
        "audit.json",
        &format!(
            r#"{{ "checks": [
  {{ "kind": "mixing", "samples": 50, "seed": 3 }},
  {{ "kind": "certificate" }},
  {{ "kind": "view", "variant": "trapfree", "runs": 600, "seed": 5,
     "program_a": "{prog_a}", "program_b": "{prog_b}",
     "classical_threshold": 0.2, "quantum_threshold": 1e-12 }}
] }}"#
        ),
    );
    let out = gtbqc(
        &["audit", "--config", &audit, "--out", "report.json"],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "stdout: {} stderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["schema"], "gtbqc-audit/1");
    assert!(report["checks"].as_array().unwrap().len() >= 4);

    // Empty audit list: empty report, exit 0.
    let empty = write(tmp.path(), "empty.json", r#"{ "checks": [] }"#);
    let out = gtbqc(&["audit", "--config", &empty], tmp.path());
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn oneway_variant_runs_from_pattern_file() {
    let tmp = tempfile::tempdir().unwrap();
    let pattern = write(
        tmp.path(),
        "pattern.json",
        r#"{ "pattern": [3.141592653589793, 1.5707963267948966, 0.7853981633974483, -0.7853981633974483] }"#,
    );
    let out = gtbqc(
        &[
            "run",
            "--variant",
            "mqc-oneway",
            "--program",
            &pattern,
            "--seed",
            "21",
            "--shots",
            "25",
            "--out",
            "out",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["pauli_class_rate"].as_f64().unwrap(), 1.0);
    let transcript = std::fs::read_to_string(tmp.path().join("out/transcript.jsonl")).unwrap();
    assert!(transcript.lines().next().unwrap().contains("mqc-oneway"));
}
