use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use transferlab::Tolerance;
use transferlab_cli::document::{emit_system_document, parse_system_document};

const NUMERIC_TOL: f64 = 1e-12;

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn transferlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transferlab"))
        .args(args)
        .env_remove("TRANSFERLAB_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

/// Structural equality with numbers compared to `NUMERIC_TOL`.
fn close(a: &Value, b: &Value, path: &str) -> Result<(), String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() <= NUMERIC_TOL {
                Ok(())
            } else {
                Err(format!("{path}: {x} vs {y}"))
            }
        }
        (Value::Array(xs), Value::Array(ys)) if xs.len() == ys.len() => xs
            .iter()
            .zip(ys)
            .enumerate()
            .try_for_each(|(i, (x, y))| close(x, y, &format!("{path}[{i}]"))),
        (Value::Object(xs), Value::Object(ys)) => {
            let kx: Vec<_> = xs.keys().collect();
            let ky: Vec<_> = ys.keys().collect();
            if kx != ky {
                return Err(format!("{path}: keys {kx:?} vs {ky:?}"));
            }
            xs.iter().try_for_each(|(k, x)| close(x, &ys[k], &format!("{path}.{k}")))
        }
        _ if a == b => Ok(()),
        _ => Err(format!("{path}: {a} vs {b}")),
    }
}

/// Compares against the stored file, or rewrites it when `TRANSFERLAB_BLESS` is set.
fn check_golden(actual: &str, expected_file: &str, numeric: bool) {
    let path = golden(expected_file);
    if std::env::var_os("TRANSFERLAB_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    if numeric {
        let a: Value = serde_json::from_str(actual).unwrap();
        let e: Value = serde_json::from_str(&expected).unwrap();
        if let Err(msg) = close(&a, &e, "$") {
            panic!("{expected_file} differs: {msg}");
        }
    } else {
        assert_eq!(actual, expected, "{expected_file} differs");
    }
}

fn analyze_golden(system: &str, extra: &[&str], stem: &str) {
    let input = golden(&format!("{system}.json"));
    let input = input.to_str().unwrap();
    for (format, ext, numeric) in [("machine", "json", true), ("human", "txt", false)] {
        let mut args = vec!["analyze", "--format", format, input];
        args.extend_from_slice(extra);
        let o = transferlab(&args);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        check_golden(&stdout(&o), &format!("expected/{stem}.{ext}"), numeric);
    }
}

#[test]
fn golden_sys_a() {
    analyze_golden("sys_a", &[], "sys_a");
}

#[test]
fn golden_sys_b() {
    analyze_golden("sys_b", &[], "sys_b");
}

#[test]
fn golden_sys_c() {
    analyze_golden("sys_c", &["--rho", "diag 0.5 0.5"], "sys_c");
}

#[test]
fn golden_sys_d() {
    analyze_golden("sys_d", &[], "sys_d");
}

#[test]
fn reports_carry_the_headline_values() {
    let b: Value = serde_json::from_str(&stdout(&transferlab(&["analyze", "--format", "machine", golden("sys_b.json").to_str().unwrap()]))).unwrap();
    assert_eq!(b["complete"], Value::Bool(true));
    let a: Value = serde_json::from_str(&stdout(&transferlab(&["analyze", "--format", "machine", golden("sys_a.json").to_str().unwrap()]))).unwrap();
    assert_eq!(a["complete"], Value::Bool(false));
    assert_eq!(a["parameter_dimension"], 1);
    let c: Value = serde_json::from_str(&stdout(&transferlab(&[
        "analyze", "--format", "machine", "--rho", "diag 0.5 0.5", golden("sys_c.json").to_str().unwrap(),
    ])))
    .unwrap();
    assert_eq!(c["transfer_norm"].as_f64(), Some(1.0));
    assert_eq!(c["nondegenerate"], Value::Bool(true));
    let human = stdout(&transferlab(&["analyze", golden("sys_b.json").to_str().unwrap()]));
    assert!(human.contains("complete:") && human.contains(" yes\n"));
    assert!(human.contains("  [0 0]\n  [1 0]\n"));
}

#[test]
fn empty_delta_has_identity_kernel_unit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, r#"{"schema": 1, "kind": "commutative", "label": "", "points": 2, "delta": [], "gamma": []}"#).unwrap();
    let o = transferlab(&["analyze", "--format", "machine", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["kernel_unit"]["kind"], "identity");
}

#[test]
fn documents_round_trip_bit_identically() {
    let tol = Tolerance::default();
    for name in ["sys_a", "sys_b", "sys_c", "sys_d"] {
        let text = std::fs::read_to_string(golden(&format!("{name}.json"))).unwrap();
        let once = emit_system_document(&parse_system_document(&text, &tol).unwrap());
        let twice = emit_system_document(&parse_system_document(&once, &tol).unwrap());
        assert_eq!(once, twice, "{name}");
        assert_eq!(once, text, "{name} is stored in canonical form");
    }
}

#[test]
fn machine_reports_round_trip_bit_identically() {
    for name in ["sys_a", "sys_b", "sys_c", "sys_d"] {
        let text = stdout(&transferlab(&["analyze", "--format", "machine", golden(&format!("{name}.json")).to_str().unwrap()]));
        let v: Value = serde_json::from_str(&text).unwrap();
        let again = transferlab_cli::document::to_text(&v);
        assert_eq!(again, text, "{name}");
    }
}

#[test]
fn verify_exit_statuses() {
    let g = |n: &str| golden(n).to_str().unwrap().to_string();
    let o = transferlab(&["verify", &g("sys_b.json"), &g("sys_b_complete.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("non-degenerate:                     pass"));

    let o = transferlab(&["verify", "--format", "machine", &g("sys_a.json"), &g("sys_a_zero.json")]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!((v["passed"].clone(), v["nondegenerate"].clone()), (Value::Bool(true), Value::Bool(false)));
    let o = transferlab(&["verify", "--require-nondegenerate", &g("sys_a.json"), &g("sys_a_zero.json")]);
    assert_eq!(o.status.code(), Some(2));

    let o = transferlab(&["verify", "--format", "machine", &g("sys_a.json"), &g("sys_a_identity.json")]);
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["failed_axiom"], "transfer_identity");
    assert!(v["witness"]["a"].is_u64() && v["witness"]["b"].is_u64());

    // a 2x2 operator cannot belong to a 3-point system
    let o = transferlab(&["verify", &g("sys_a.json"), &g("sys_b_complete.json")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema": 1, "kind": "commutative", "label": "", "points": 3, "delta": [0], "gamma": [5]}"#).unwrap();
    let o = transferlab(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma image out of range"));
    assert_eq!(transferlab(&["analyze", "/nonexistent/file.json"]).status.code(), Some(1));
    assert_eq!(transferlab(&["analyze", "--bogus"]).status.code(), Some(1));
    assert_eq!(transferlab(&["--help"]).status.code(), Some(0));
}

#[test]
fn construct_commands() {
    let g = |n: &str| golden(n).to_str().unwrap().to_string();
    let o = transferlab(&["construct", "complete", "--format", "machine", &g("sys_b.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), std::fs::read_to_string(golden("sys_b_complete.json")).unwrap());
    assert_eq!(transferlab(&["construct", "complete", &g("sys_d.json")]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lambda.json");
    let o = transferlab(&[
        "construct", "from-expectation", "--format", "machine", "-o", out.to_str().unwrap(),
        &g("sys_d.json"), &g("sys_d_expectation.json"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = transferlab(&["verify", "--require-nondegenerate", &g("sys_d.json"), out.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0));
    // E_{1/2} is not a valid expectation for SYS-B's shape
    assert_eq!(transferlab(&["construct", "from-expectation", &g("sys_b.json"), &g("sys_d_expectation.json")]).status.code(), Some(1));
}

#[test]
fn sampling_is_seeded() {
    let g = golden("sys_a.json");
    let run = |seed: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_transferlab"));
        cmd.args(["commutative", "sample", "--format", "machine", g.to_str().unwrap()]);
        match seed {
            Some(s) => cmd.env("TRANSFERLAB_SEED", s),
            None => cmd.env_remove("TRANSFERLAB_SEED"),
        };
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        stdout(&cmd.output().unwrap())
    };
    assert_eq!(run(Some("7"), None), run(None, Some("7")));
    assert_ne!(run(None, Some("7")), run(None, Some("8")));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    std::fs::write(&out, run(None, Some("7"))).unwrap();
    let v = transferlab(&["verify", "--require-nondegenerate", g.to_str().unwrap(), out.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0));
}

#[test]
fn enumeration_counts() {
    let o = transferlab(&["commutative", "enumerate", "--points", "3", "--format", "machine"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["count"], 64);
    // injective partial maps on 3 points: sum_k C(3,k)^2 k!
    assert_eq!(v["complete_count"], 34);
    assert_eq!(transferlab(&["commutative", "enumerate", "--points", "9"]).status.code(), Some(1));
}

#[test]
fn bh_demo_forms_agree() {
    let o = transferlab(&[
        "bh", "demo", "--n", "3", "--d", "2", "--seed", "11", "--mu", "0.2 0.3 0.5", "--unitary", "fourier",
        "--format", "machine",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let r = &v["density"]["residuals"];
    for key in ["form_agreement", "unit_image", "state", "tensor_round_trip", "expectation_vs_alpha_lambda"] {
        assert!(r[key].as_f64().unwrap() <= 1e-10, "{key}");
    }
    assert_eq!(v["parameter_dimension"], 8);
    let sub = transferlab(&["bh", "demo", "--n", "2", "--d", "1", "--rho", "diag 0.25 0.25", "--format", "machine"]);
    let v: Value = serde_json::from_str(&stdout(&sub)).unwrap();
    assert_eq!(v["nondegenerate"], Value::Bool(false));
    assert!((v["transfer_norm"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}
