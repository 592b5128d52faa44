use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).to_string_lossy().into_owned()
}

fn bloch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bloch")).args(args).output().expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = bloch(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn envelope_fields() {
    let v = json_ok(&["--seed", "7", "pair", "--mol", &fixture("molecule.json"), "--func", &fixture("f_pair.json")]);
    assert_eq!(v["tool"], "bloch");
    assert_eq!(v["command"], "pair");
    assert_eq!(v["seed"], 7);
    assert!(v["version"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
}

#[test]
fn eval_matches_closed_form() {
    let v = json_ok(&["eval", "--func", &fixture("f_tensor.json"), "--points", &fixture("points.json")]);
    let points: Vec<[f64; 2]> = serde_json::from_str(&std::fs::read_to_string(fixture("points.json")).unwrap()).unwrap();
    let rows = v["result"].as_array().unwrap();
    assert_eq!(rows.len(), points.len());
    // f = f_a · (1, 2i) with a = 0.3 + 0.1i
    let (ar, ai) = (0.3, 0.1);
    for (row, z) in rows.iter().zip(&points) {
        // 1 - conj(a) z
        let dr = 1.0 - (ar * z[0] + ai * z[1]);
        let di = -(ar * z[1] - ai * z[0]);
        let s = 1.0 - ar * ar - ai * ai;
        // s / (d^2)
        let (d2r, d2i) = (dr * dr - di * di, 2.0 * dr * di);
        let m = d2r * d2r + d2i * d2i;
        let (gr, gi) = (s * d2r / m, -s * d2i / m);
        let der = &row["derivative"];
        assert!((f(&der[0][0]) - gr).abs() < 1e-13 && (f(&der[0][1]) - gi).abs() < 1e-13);
        assert!((f(&der[1][0]) + 2.0 * gi).abs() < 1e-13 && (f(&der[1][1]) - 2.0 * gr).abs() < 1e-13);
    }
}

#[test]
fn seminorm_bracket_and_sweep() {
    let v = json_ok(&["seminorm", "--func", r#"{"kind":"monomial","k":2}"#]);
    let exact = 4.0 * 3f64.sqrt() / 9.0;
    let (lo, hi) = (f(&v["result"]["lower"]), f(&v["result"]["upper"]));
    assert!(lo <= exact + 1e-12 && exact <= hi + 1e-12 && hi - lo < 1e-3);

    let v = json_ok(&["seminorm", "--func", &fixture("f_poly.json"), "--resolution", "32,64,128"]);
    let rows = v["result"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert!(f(&r["lower"]) <= f(&r["upper"]));
    }
    // finer grids never loosen the upper bound by more than rounding
    assert!(f(&rows[2]["upper"]) <= f(&rows[0]["upper"]) + 1e-12);
}

#[test]
fn taylor_node_has_no_finite_upper_bound() {
    let v = json_ok(&["seminorm", "--func", &fixture("f_taylor.json")]);
    assert_eq!(v["result"]["upper"], "inf");
    assert!(f(&v["result"]["lower"]) > 0.0);
}

#[test]
fn summing_sweep() {
    let v = json_ok(&[
        "summing",
        "--func",
        &fixture("f_tensor.json"),
        "--sample",
        &fixture("sample.json"),
        "--family",
        &fixture("family_recipe.json"),
        "--p",
        "1,2,4,inf",
    ]);
    let rows = v["result"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert!(f(&r["denominator_family"]) <= f(&r["denominator_closed_form"]) + 1e-12);
        assert!(f(&r["certified_lower"]) <= f(&r["heuristic_ratio"]) + 1e-12);
    }
}

#[test]
fn pietsch_full() {
    let v = json_ok(&[
        "pietsch",
        "--func",
        &fixture("f_tensor.json"),
        "--points",
        &fixture("points.json"),
        "--family",
        &fixture("family_recipe.json"),
        "--dual",
        "--factorize",
        "--check-points",
        &fixture("extra_points.json"),
    ]);
    let r = &v["result"];
    // the anchor is a sample point, so the constant is |x| = sqrt(5)
    assert!((f(&r["measure"]["constant"]) - 5f64.sqrt()).abs() < 1e-9);
    let w = r["measure"]["weights"].as_array().unwrap();
    assert!(w.iter().all(|x| f(x) >= -1e-12));
    assert!((w.iter().map(f).sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(f(&r["duality"]["relative_gap"]) < 1e-7);
    assert!(f(&r["domination_solved"]) >= -1e-9);
    assert!(f(&r["factorization"]["residual"]) < 1e-8);
    assert!(f(&r["check_points"]["worst_margin"]) >= -1e-9);
}

#[test]
fn pietsch_rejects_infinite_exponent() {
    let out = bloch(&["pietsch", "--func", &fixture("f_tensor.json"), "--points", &fixture("points.json"), "--p", "inf"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("inf"));
}

#[test]
fn maurey_bound_holds() {
    let v = json_ok(&[
        "maurey",
        "--func",
        &fixture("f_tensor.json"),
        "--points",
        &fixture("points.json"),
        "--family",
        &fixture("family_recipe.json"),
    ]);
    let r = &v["result"];
    let c_max = f(&r["c_max"]);
    // theta = (q - p)/(q - 1) = 2/3 for p = 2, q = 4
    assert!((f(&r["constant_c"]) - 2.0 * (2.0 * c_max).powf(1.5)).abs() < 1e-9);
    assert!(f(&r["final_margin"]) >= 0.0);
}

#[test]
fn molecule_bounds() {
    let v = json_ok(&["molecule", "--mol", &fixture("molecule.json"), "--p", "1,2", "--bounds"]);
    for r in v["result"].as_array().unwrap() {
        // atoms 1·δ_0·e1 and i·δ_{1/2}·2e2: projective value 1 + 2/(3/4)
        assert!((f(&r["projective_upper"]) - 11.0 / 3.0).abs() < 1e-12);
        assert!(f(&r["lower"]) <= f(&r["upper"]) + 1e-12);
        assert!(f(&r["upper"]) <= f(&r["projective_upper"]) + 1e-12);
    }
    let v = json_ok(&["molecule", "--mol", &fixture("molecule.json")]);
    assert_eq!(v["result"]["atoms"], 2);
}

#[test]
fn pairing_value() {
    let v = json_ok(&["pair", "--mol", &fixture("molecule.json"), "--func", &fixture("f_pair.json")]);
    assert_eq!(v["result"]["pairing"], serde_json::json!([1.0, 2.0]));
}

#[test]
fn boundary_sample_is_input_error() {
    let out = bloch(&["summing", "--func", &fixture("f_tensor.json"), "--sample", &fixture("sample_boundary.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("entry 1"), "{}", stderr(&out));
    assert!(out.stdout.is_empty());

    let out = bloch(&["verify", "--scenario", &fixture("scenario_boundary.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("entry 2"), "{}", stderr(&out));
}

#[test]
fn malformed_inputs_exit_2() {
    for args in [
        vec!["eval", "--func", "{\"kind\":\"nope\"}", "--points", "[[0,0]]"],
        vec!["eval", "--func", "/nonexistent/f.json", "--points", "[[0,0]]"],
        vec!["eval", "--func", "{\"kind\":\"monomial\",\"k\":1}", "--points", "[[0.5,0.9]]"],
        vec!["--tol", "oops", "verify"],
        vec!["verify", "--scenario", "no-such-scenario"],
    ] {
        let out = bloch(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn corrupt_family_fails_verify() {
    let out = bloch(&["verify", "--json", "--family", &fixture("family_corrupt.json")]);
    assert_eq!(out.status.code(), Some(1));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let check = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "norms.user_family").unwrap();
    assert_eq!(check["status"], "fail");
    assert_eq!(check["provenance"], "certified");
    assert!(r["summary"]["certified_failures"].as_u64().unwrap() >= 1);

    let out = bloch(&["summing", "--func", &fixture("f_tensor.json"), "--sample", &fixture("sample.json"), "--family", &fixture("family_corrupt.json")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tolerance_override_can_fail_a_check() {
    let out = bloch(&["verify", "--scenario", "prop1-inclusions", "--json", "--tol", "duality=1e-30"]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let check = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "duality").unwrap();
    if check["status"] == "fail" {
        assert_eq!(out.status.code(), Some(1));
    } else {
        assert_eq!(out.status.code(), Some(0));
        assert!(f(&check["margin"]) >= 0.0);
    }
    assert_eq!(f(&check["tolerance"]), 1e-30);
}

#[test]
fn scenario_file_runs() {
    let v = json_ok(&["verify", "--json", "--scenario", &fixture("scenario_maurey.json")]);
    assert_eq!(v["scenario"]["name"], "maurey-tensor");
    assert_eq!(v["summary"]["certified_failures"], 0);
    assert!(v["checks"].as_array().unwrap().iter().any(|c| c["name"] == "maurey_final"));
}

#[test]
fn csv_output() {
    let out = bloch(&["--csv", "verify", "--scenario", "prop1-inclusions"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,status,provenance,tolerance,margin"));
    assert_eq!(lines.count(), 6);

    let out = bloch(&["--csv", "seminorm", "--func", &fixture("f_poly.json"), "--resolution", "32,64"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("resolution,lower,upper"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn deterministic_across_thread_counts() {
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_bloch"))
            .args(["verify", "--json", "--scenario", "prop1-inclusions"])
            .env("BLOCH_MAX_THREADS", threads)
            .output()
            .unwrap();
        let mut v: Value = serde_json::from_slice(&out.stdout).unwrap();
        v["timing_seconds"] = Value::Null;
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(run("1"), run("4"));

    let a = bloch(&["--seed", "3", "molecule", "--mol", &fixture("molecule.json"), "--bounds"]);
    let b = bloch(&["--seed", "3", "molecule", "--mol", &fixture("molecule.json"), "--bounds"]);
    assert_eq!(a.stdout, b.stdout);
}
