use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fnmat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fnmat")).args(args).output().expect("binary runs")
}

fn fnmat_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fnmat")).args(args).env("FNMAT_THREADS", threads).output().expect("binary runs")
}

fn json_ok(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn error_of(out: &Output) -> (i32, Value) {
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is a json error");
    assert_eq!(err["schema_version"], 1);
    (out.status.code().unwrap(), err["error"].clone())
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fnmat-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn path_matrix(n: usize, b: f64) -> PathBuf {
    let entries: Vec<_> = (1..n).map(|i| serde_json::json!([i, i + 1, b, 0.0])).collect();
    let file = scratch(&format!("path-{n}.json"));
    std::fs::write(&file, serde_json::json!({ "n": n, "entries": entries }).to_string()).unwrap();
    file
}

fn without_wall_time(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_time_s");
    v
}

#[test]
fn approx_degree_examples() {
    let v = json_ok(&fnmat(&["approx-degree", "--function", "cheb:d=7", "--eps", "0.5"]));
    assert_eq!(v["d"], 7);
    assert_eq!(v["schema_version"], 1);
    let v = json_ok(&fnmat(&["approx-degree", "--function", "const:c=0.3", "--eps", "0.1"]));
    assert_eq!(v["d"], 0);
}

#[test]
fn exact_path_entry() {
    let m = path_matrix(5, 0.5);
    let m = m.to_str().unwrap();
    let v = json_ok(&fnmat(&["estimate", "--matrix", m, "--function", "power:d=2", "--i", "1", "--j", "3", "--method", "exact"]));
    assert!((v["value"][0].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(v["method"], "exact");
}

#[test]
fn walk_matches_oracle_and_is_deterministic() {
    let m = path_matrix(6, 0.5);
    let m = m.to_str().unwrap();
    let args = ["estimate", "--matrix", m, "--function", "sin:t=2", "--degree", "9", "--i", "2", "--j", "3"];
    let walk = |threads: &str| {
        let mut a = args.to_vec();
        a.extend(["--method", "walk", "--eps", "0.05", "--seed", "9"]);
        json_ok(&fnmat_env(&a, threads))
    };
    let first = walk("1");
    assert_eq!(without_wall_time(first.clone()), without_wall_time(walk("1")));
    assert_eq!(without_wall_time(first.clone()), without_wall_time(walk("3")));
    let mut a = args.to_vec();
    a.extend(["--method", "oracle"]);
    let oracle = json_ok(&fnmat(&a));
    let diff = first["value"][0].as_f64().unwrap() - oracle["value"][0].as_f64().unwrap();
    // the degree-9 interpolant of sin(2x) is within 1e-7 of sin on [-1, 1]
    assert!(diff.abs() < 0.05, "walk vs oracle differ by {diff}");
}

#[test]
fn contour_matches_oracle() {
    let m = path_matrix(5, 0.25);
    let m = m.to_str().unwrap();
    let base = ["estimate", "--matrix", m, "--function", "exp:t=1", "--i", "1", "--j", "2"];
    let mut a = base.to_vec();
    a.extend(["--method", "contour", "--lambda", "0.45", "--big-lambda", "1.0", "--eps", "0.05"]);
    let c = json_ok(&fnmat(&a));
    let mut a = base.to_vec();
    a.extend(["--method", "oracle"]);
    let o = json_ok(&fnmat(&a));
    let diff = c["value"][0].as_f64().unwrap() - o["value"][0].as_f64().unwrap();
    assert!(diff.abs() < 0.05, "{diff}");
    assert!(c["nodes"].as_u64().unwrap() >= 1);
}

#[test]
fn witness_round_trip_and_tamper() {
    let cert = scratch("cert.json");
    let c = cert.to_str().unwrap();
    let out = fnmat(&["witness", "build", "--function", "sin:t=12", "--eps", "0.25", "--out", c]);
    assert!(out.status.success());
    let v = json_ok(&fnmat(&["witness", "verify", "--certificate", c]));
    assert_eq!(v["verification"]["ok"], true);
    assert!(v["verification"]["residual"].as_f64().unwrap() <= 1e-6);

    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    let b = &mut doc["certificate"]["matrix"]["offdiag"][2];
    *b = Value::from(b.as_f64().unwrap() + 1e-3);
    let bad = scratch("cert-bad.json");
    std::fs::write(&bad, doc.to_string()).unwrap();
    let out = fnmat(&["witness", "verify", "--certificate", bad.to_str().unwrap()]);
    let (code, err) = error_of(&out);
    assert_eq!(code, 1);
    assert_eq!(err["kind"], "verification_failed");
    let verdict: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(verdict["verification"]["ok"], false);
}

#[test]
fn nff_certifies_positive_bound() {
    let m = 16;
    let t = format!("{}", (2 * m - 1) as f64 * std::f64::consts::PI / 2.0);
    let v = json_ok(&fnmat(&["witness", "certify", "--nff", "16", "--function", &format!("sin:t={t}"), "--eps", "0.9"]));
    assert!(v["lower_bound"].as_u64().unwrap() > 0);
}

#[test]
fn structured_errors() {
    let (code, err) = error_of(&fnmat(&["approx-degree", "--function", "sin:t=2", "--eps", "0.1", "--bogus"]));
    assert_eq!((code, err["kind"].as_str().unwrap()), (2, "usage"));
    let (code, err) = error_of(&fnmat(&["approx-degree", "--function", "nope", "--eps", "0.1"]));
    assert_eq!((code, err["kind"].as_str().unwrap()), (1, "function"));
    let (_, err) = error_of(&fnmat(&["approx-degree", "--function", "sin:t=2", "--eps=-1"]));
    assert_eq!(err["kind"], "approx");
    let missing = scratch("missing.json");
    let (_, err) = error_of(&fnmat(&[
        "estimate", "--matrix", missing.to_str().unwrap(), "--function", "power:d=1", "--i", "1", "--j", "1",
    ]));
    assert_eq!(err["kind"], "io");
    let m = path_matrix(3, 0.5);
    let (_, err) = error_of(&fnmat(&[
        "estimate", "--matrix", m.to_str().unwrap(), "--function", "power:d=1", "--i", "9", "--j", "1", "--method", "exact",
    ]));
    assert_eq!(err["kind"], "estimate");
    let (_, err) = error_of(&fnmat(&[
        "estimate", "--matrix", m.to_str().unwrap(), "--function", "power:d=1", "--i", "1", "--j", "1", "--method", "exact",
        "--budget", "0",
    ]));
    assert_eq!(err["kind"], "estimate");
    let (code, _) = error_of(&fnmat(&["witness", "build", "--function", "sin:t=2", "--eps", "0.1", "--format", "csv"]));
    assert_eq!(code, 2);
}

#[test]
fn hardness_round_trip() {
    let bundle = scratch("parity.json");
    let b = bundle.to_str().unwrap();
    assert!(fnmat(&["hardness", "gen", "--family", "parity", "--bits", "10110", "--function", "sin:t=4", "--out", b])
        .status
        .success());
    let v = json_ok(&fnmat(&["hardness", "verify", "--bundle", b]));
    assert_eq!(v["report"]["ok"], true);
    assert_eq!(v["report"]["details"]["parity"], 1);

    let forr = scratch("forrelation.json");
    let f = forr.to_str().unwrap();
    let gen = ["hardness", "gen", "--family", "forrelation", "--n", "2", "--function", "sin:t=5", "--seed", "4"];
    let mut a = gen.to_vec();
    a.extend(["--out", f]);
    assert!(fnmat(&a).status.success());
    let first = std::fs::read_to_string(&forr).unwrap();
    assert!(fnmat(&a).status.success());
    let again = std::fs::read_to_string(&forr).unwrap();
    let strip = |s: &str| without_wall_time(serde_json::from_str(s).unwrap());
    assert_eq!(strip(&first), strip(&again));
    let v = json_ok(&fnmat(&["hardness", "verify", "--bundle", f]));
    assert!(v["report"]["residual"].as_f64().unwrap() <= 1e-8);

    let (_, err) = error_of(&fnmat(&["hardness", "gen", "--family", "parity", "--bits", "10x", "--function", "sin:t=4"]));
    assert_eq!(err["kind"], "usage");
    let junk = scratch("junk.json");
    std::fs::write(&junk, r#"{"kind": "parity", "bits": [1]}"#).unwrap();
    let (_, err) = error_of(&fnmat(&["hardness", "verify", "--bundle", junk.to_str().unwrap()]));
    assert_eq!(err["kind"], "parse");
}

fn csv_rows(out: &Output) -> Vec<Vec<String>> {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "schema_version,family,method,parameter,degree,dimension,queries_o1,queries_o2,error"
    );
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

/// Least-squares slope, intercept and R^2.
fn fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx, sxy * sxy / (sxx * syy))
}

#[test]
fn bench_witness_dimension_is_linear_in_t() {
    let rows = csv_rows(&fnmat(&["bench", "--family", "sin", "--sweep", "4,8,12,16,20,24,28,32", "--format", "csv"]));
    let t: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    let n: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    let (slope, icept, r2) = fit(&t, &n);
    assert!(r2 > 0.98, "r2 {r2}");
    for (x, y) in t.iter().zip(&n) {
        let line = slope * x + icept;
        assert!((y - line).abs() <= 0.2 * line, "t={x}: n={y} vs {line}");
    }
}

#[test]
fn bench_exact_queries_grow_like_s_to_the_d() {
    let rows = csv_rows(&fnmat(&["bench", "--family", "power", "--sweep", "2,3,4,5,6,7", "--method", "exact", "--format", "csv"]));
    let d: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    let q: Vec<f64> = rows.iter().map(|r| r[6].parse::<f64>().unwrap().ln()).collect();
    let (slope, _, _) = fit(&d, &q);
    let want = 4f64.ln();
    assert!((slope - want).abs() <= 0.2 * want, "log-slope {slope} vs {want}");
    for r in &rows {
        assert!(r[8].parse::<f64>().unwrap() < 1e-12);
    }
}

#[test]
fn bench_walk_queries_grow_with_t() {
    let rows = csv_rows(&fnmat(&["bench", "--family", "sin", "--sweep", "1,2,3", "--method", "walk", "--eps", "0.1", "--format", "csv"]));
    let q: Vec<u64> = rows.iter().map(|r| r[6].parse().unwrap()).collect();
    assert!(q.windows(2).all(|w| w[0] < w[1]), "{q:?}");
    for r in &rows {
        assert!(r[8].parse::<f64>().unwrap() < 0.1);
    }
}
