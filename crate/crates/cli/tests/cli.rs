use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn phk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phk")).args(args).output().expect("run phk")
}

fn verify(name: &str) -> (i32, Value) {
    let path = data(name);
    let out = phk(&["verify", path.to_str().unwrap()]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), report)
}

fn csv_rows(stdout: &[u8]) -> Vec<Vec<String>> {
    String::from_utf8_lossy(stdout).lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn w1_passes_with_defects_two_and_one() {
    let (code, report) = verify("w1.json");
    assert_eq!(code, 0);
    let inv = report["diffable"]["invariance"].as_array().unwrap();
    let dims: Vec<(&str, u64)> = inv.iter().map(|i| (i["mode"].as_str().unwrap(), i["minimal_defect"].as_u64().unwrap())).collect();
    assert_eq!(dims, [("near-backshift", 2), ("almost-shift", 1)]);
    assert_eq!(report["diffable"]["verdict"], "pass");
}

#[test]
fn zero_symbol_defect_space_is_spanned_by_u() {
    let (code, report) = verify("zero_symbol_u_z.json");
    assert_eq!(code, 0);
    for check in report["diffable"]["invariance"].as_array().unwrap() {
        let basis = check["f_basis"].as_array().unwrap();
        assert_eq!(basis.len(), 1);
        let coeffs = basis[0].as_array().unwrap();
        let modulus = |c: &Value| c[0].as_f64().unwrap().hypot(c[1].as_f64().unwrap());
        assert!((modulus(&coeffs[1]) - 1.0).abs() < 1e-10);
        assert!(coeffs.iter().enumerate().all(|(k, c)| k == 1 || modulus(c) < 1e-10));
    }
}

#[test]
fn zero_outside_the_disk_is_invalid_input() {
    let path = data("outside_disk.json");
    let out = phk(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unit disk"));
}

#[test]
fn unreadable_or_malformed_input_exits_two() {
    assert_eq!(phk(&["verify", "/no/such/scenario.json"]).status.code(), Some(2));
    let dir = std::env::temp_dir().join(format!("phk-malformed-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"symbol": {"kind": "zero"}, "colour": 3}"#).unwrap();
    assert_eq!(phk(&["verify", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(phk(&["random", "--filter", "no-such-class"]).status.code(), Some(2));
}

#[test]
fn out_flag_writes_the_report() {
    let dir = std::env::temp_dir().join(format!("phk-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let target = dir.join("report.json");
    let w1 = data("w1.json");
    let out = phk(&["verify", w1.to_str().unwrap(), "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(report["diffable"]["scenario"]["name"], "w1");
}

#[test]
fn random_runs_are_deterministic_under_seed() {
    let run = || {
        let out = phk(&["random", "--count", "12", "--seed", "11"]);
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        (out.status.code().unwrap(), v["diffable"].clone())
    };
    let (code_a, a) = run();
    let (code_b, b) = run();
    assert_eq!(a, b);
    assert_eq!(code_a, code_b);
    let idx: Vec<u64> = a["results"].as_array().unwrap().iter().map(|r| r["index"].as_u64().unwrap()).collect();
    assert_eq!(idx, (0..12).collect::<Vec<_>>());
}

#[test]
fn analytic_symbol_filter_respects_rank_bound() {
    let out = phk(&["random", "--count", "20", "--seed", "5", "--filter", "analytic-symbol-near", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out.stdout);
    assert_eq!(rows[0][6], "f_dim");
    assert_eq!(rows.len(), 21);
    for r in &rows[1..] {
        assert_eq!(r[3], "pass");
        assert!(r[6].parse::<usize>().unwrap() <= r[7].parse::<usize>().unwrap());
    }
}

#[test]
fn sweep_csv_for_blaschke_half_converges() {
    let path = data("blaschke_half.json");
    let out = phk(&["sweep", path.to_str().unwrap(), "--orders", "20,40,60,80"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out.stdout);
    assert_eq!(rows[0].join(","), "N,ker_dim,max_angle,max_residual,ms");
    let angles: Vec<f64> = rows[1..].iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(angles.len(), 4);
    assert!(angles.windows(2).all(|w| w[1] <= 10.0 * w[0].max(1e-15)));
    assert!(angles[2] <= 1e-6);
}

#[test]
fn sweep_for_monomial_inner_is_exact() {
    let path = data("theta_z.json");
    let out = phk(&["sweep", path.to_str().unwrap(), "--orders", "20,30,40", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for row in v["rows"].as_array().unwrap() {
        assert!(row["max_angle"].as_f64().unwrap() < 1e-12);
        // the section kernel misses K_{zθ} = span{1, z}
        assert_eq!(row["ker_dim"].as_u64().unwrap() + 1, row["N"].as_u64().unwrap());
    }
}

#[test]
fn known_false_near_statement_exits_one() {
    let out = phk(&["random", "--count", "10", "--seed", "1", "--filter", "outer-only-near"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let violations = v["diffable"]["violations"].as_u64().unwrap();
    assert_eq!(out.status.code(), Some(if violations > 0 { 1 } else { 0 }));
}
