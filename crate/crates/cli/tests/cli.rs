use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rmpu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmpu")).args(args).output().expect("spawn rmpu")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Data rows of a CSV with `#` provenance lines stripped.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn header_lines(text: &str) -> Vec<&str> {
    text.lines().take_while(|l| l.starts_with('#')).collect()
}

fn write_manifest(dir: &Path, name: &str, body: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(body).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn run_manifest(dir: &Path, name: &str, body: &Value) -> (Output, String) {
    let m = write_manifest(dir, &format!("{name}.manifest.json"), body);
    let prefix = dir.join(name).to_string_lossy().into_owned();
    (rmpu(&["run", "--manifest", &m, "--out", &prefix]), prefix)
}

fn read(p: &str) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{p}: {e}"))
}

#[test]
fn provenance_header_on_csv() {
    let o = rmpu(&["nc-count", "--k", "4"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    let h = header_lines(&s);
    assert_eq!(h.len(), 3);
    assert_eq!(h[0], format!("# rmpu {}", env!("CARGO_PKG_VERSION")));
    let hex = h[1].strip_prefix("# manifest_sha256 ").unwrap();
    assert_eq!(hex.len(), 64);
    assert!(hex.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(h[2], "# seed none");
}

#[test]
fn nc_count_catalan_and_pairs() {
    let s = stdout(&rmpu(&["nc-count", "--k", "6", "--m", "1"]));
    let counts: Vec<String> = csv_rows(&s).iter().map(|r| r[2].clone()).collect();
    assert_eq!(counts, ["1", "2", "5", "14", "42", "132"]);
    let s = stdout(&rmpu(&["nc-count", "--k", "6"]));
    let counts: Vec<String> = csv_rows(&s).iter().map(|r| r[2].clone()).collect();
    assert_eq!(counts, ["1", "3", "12", "55", "273", "1428"]);
}

#[test]
fn wg_table_json() {
    let o = rmpu(&["wg-table", "--k", "2", "--dim", "3"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["artifact_version"], env!("CARGO_PKG_VERSION"));
    assert!(v["manifest_sha256"].as_str().unwrap().len() == 64);
    let classes = v["classes"].as_array().unwrap();
    let value = |ct: Value| classes.iter().find(|c| c["cycle_type"] == ct).unwrap()["value"].clone();
    assert_eq!(value(serde_json::json!([1, 1])), serde_json::json!(["1", "8"]));
    assert_eq!(value(serde_json::json!([2])), serde_json::json!(["-1", "24"]));
}

#[test]
fn cumulants_of_semicircle() {
    let o = rmpu(&["cumulants", "--moments", "0,1,0,2,0,5"]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&stdout(&o));
    let k: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(k, ["0", "1", "0", "0", "0", "0"]);
}

#[test]
fn cumulants_accept_negative_moments() {
    let o = rmpu(&["cumulants", "--moments", "-1/2,1/4"]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows[0][2], "-1/2");
    assert_eq!(rows[1][2], "0");
}

#[test]
fn otoc_exact_haar_mode() {
    let o = rmpu(&["otoc-exact", "--k", "2", "--dim", "8,16,32,64"]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&stdout(&o));
    let fit = rows.iter().find(|r| r[0] == "otoc_haar_dim_exponent").unwrap();
    let e: f64 = fit[7].parse().unwrap();
    assert!((e + 2.0).abs() < 0.3, "{e}");
}

#[test]
fn otoc_exact_chi_sweep() {
    let o = rmpu(&[
        "otoc-exact", "--k", "2,3", "--d", "2", "--n", "2", "--chi-list", "2,4,8,16",
        "--moments-a", "1/3,1/2,2/5", "--moments-b", "-1/4,3/7,1/9",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&stdout(&o));
    let fits: Vec<f64> = rows.iter().filter(|r| r[0] == "otoc_rmpu_chi_exponent").map(|r| r[7].parse().unwrap()).collect();
    assert_eq!(fits.len(), 2);
    assert!(fits.iter().all(|e| (e + 2.0).abs() < 0.3), "{fits:?}");
}

#[test]
fn otoc_exact_light_cone() {
    let o = rmpu(&["otoc-exact", "--k", "2", "--d", "2", "--n", "3", "--r", "1", "--site-m", "1,2,3"]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&stdout(&o));
    let m1 = rows.iter().find(|r| r[0] == "otoc_rmpu_m1").unwrap();
    let gate = rows.iter().find(|r| r[0] == "otoc_haar_gate").unwrap();
    assert_eq!(m1[7], gate[7]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("light_cone"));
}

#[test]
fn otoc_mc_passes_and_is_reproducible() {
    let args = ["otoc-mc", "--k", "2", "--d", "2", "--r", "1", "--n", "2", "--samples", "2000", "--seed", "5"];
    let a = rmpu(&args);
    let b = rmpu(&args);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("# seed 5"));
}

#[test]
fn failed_check_exits_one() {
    let o = rmpu(&["otoc-mc", "--k", "2", "--dim", "4", "--samples", "2", "--seed", "2"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
}

#[test]
fn frame_potential_with_sampling() {
    let o = rmpu(&["frame-potential", "--k", "2", "--d", "2", "--n", "2", "--r", "1", "--samples", "500", "--seed", "4"]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&stdout(&o));
    let exact = rows.iter().find(|r| r[8] == "exact").unwrap();
    assert_eq!(exact[7], "2.32");
    assert!(rows.iter().any(|r| r[8] == "mc"));
}

#[test]
fn verify_identity_json() {
    let o = rmpu(&["verify-identity", "--dim", "4", "--k", "2"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["rel_error"].as_f64().unwrap() < 1e-10);
}

#[test]
fn table_reports_pass() {
    for t in ["table2", "table1_row1", "table1_row2"] {
        let o = rmpu(&["table-report", "--table", t]);
        assert_eq!(code(&o), 0, "{t}: {}", stdout(&o));
        assert!(!stdout(&o).contains("FAIL"));
    }
}

#[test]
fn manifest_genus_counts() {
    let dir = tempfile::tempdir().unwrap();
    let body = serde_json::json!({"schema_version": 1, "quantity": "genus_counts", "grid": {"k": [1, 2, 3, 4, 5, 6]}});
    let (o, prefix) = run_manifest(dir.path(), "genus", &body);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let rows = csv_rows(&read(&format!("{prefix}.csv")));
    let g1: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(g1, ["0", "1", "21", "270", "2860", "27300"]);
    let summary: Value = serde_json::from_str(&read(&format!("{prefix}.json"))).unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["seed"], 0);
}

#[test]
fn manifest_frame_potential_single_gate() {
    let dir = tempfile::tempdir().unwrap();
    let body = serde_json::json!({
        "schema_version": 1, "quantity": "frame_potential",
        "grid": {"k": [1, 2, 3], "d": [2], "r": [1, 2], "n": [1]}
    });
    let (o, prefix) = run_manifest(dir.path(), "fp", &body);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let rows = csv_rows(&read(&format!("{prefix}.csv")));
    for r in rows.iter().filter(|r| r[8] == "exact") {
        let k: u32 = r[1].parse().unwrap();
        let fact: u32 = (1..=k).product();
        let v: f64 = r[7].parse().unwrap();
        assert_eq!(v, fact as f64);
    }
}

#[test]
fn manifest_otoc_rmpu_chi_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let body = serde_json::json!({
        "schema_version": 1, "quantity": "otoc_rmpu",
        "grid": {"k": [2], "d": [2], "n": [2], "chi": [2, 4, 8, 16]},
        "observables": {"a": {"kind": "projector", "rank": 1}, "b": {"moments": ["1/2", "1/2", "1/2"]}}
    });
    let (o, prefix) = run_manifest(dir.path(), "sweep", &body);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let rows = csv_rows(&read(&format!("{prefix}.csv")));
    let fit = rows.iter().find(|r| r[0] == "otoc_rmpu_chi_exponent").unwrap();
    let e: f64 = fit[7].parse().unwrap();
    assert!((e + 2.0).abs() < 0.3, "{e}");
}

#[test]
fn manifest_otoc_haar_with_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let body = serde_json::json!({
        "schema_version": 1, "quantity": "otoc_haar", "seed": 11, "samples": 1000,
        "grid": {"k": [2], "D": [4, 8]},
        "observables": {"a": {"kind": "projector", "rank": 1}, "b": {"kind": "random_hermitian", "seed": 7}}
    });
    let (o, prefix) = run_manifest(dir.path(), "haar", &body);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let est = read(&format!("{prefix}.estimates.csv"));
    assert!(est.contains("# seed 11"));
    assert_eq!(csv_rows(&est).len(), 2);
}

#[test]
fn manifest_cumulants_and_identity() {
    let dir = tempfile::tempdir().unwrap();
    let body = serde_json::json!({
        "schema_version": 1, "quantity": "cumulants",
        "observables": {"a": {"moments": ["0", "1", "0", "2"]}, "b": {"moments": ["0"]}}
    });
    let (o, _) = run_manifest(dir.path(), "cum", &body);
    assert_eq!(code(&o), 0);
    let body = serde_json::json!({"schema_version": 1, "quantity": "identity_checks", "grid": {"k": [1, 2], "D": [4, 8]}});
    let (o, prefix) = run_manifest(dir.path(), "id", &body);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(csv_rows(&read(&format!("{prefix}.csv"))).len(), 4);
}

#[test]
fn manifest_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let body = serde_json::json!({
        "schema_version": 1, "quantity": "frame_potential", "seed": 3, "samples": 200,
        "grid": {"k": [2], "d": [2], "r": [1], "n": [2]}
    });
    let (o1, p) = run_manifest(dir.path(), "a", &body);
    let first = [read(&format!("{p}.csv")), read(&format!("{p}.estimates.csv")), read(&format!("{p}.json"))];
    let (o2, p) = run_manifest(dir.path(), "a", &body);
    let second = [read(&format!("{p}.csv")), read(&format!("{p}.estimates.csv")), read(&format!("{p}.json"))];
    assert_eq!(code(&o1), code(&o2));
    assert_eq!(first, second);
}

#[test]
fn manifest_hash_depends_on_content() {
    let dir = tempfile::tempdir().unwrap();
    let a = serde_json::json!({"schema_version": 1, "quantity": "genus_counts", "grid": {"k": [3]}});
    let b = serde_json::json!({"schema_version": 1, "quantity": "genus_counts", "grid": {"k": [4]}});
    let (_, pa) = run_manifest(dir.path(), "a", &a);
    let (_, pb) = run_manifest(dir.path(), "b", &b);
    let ha: Value = serde_json::from_str(&read(&format!("{pa}.json"))).unwrap();
    let hb: Value = serde_json::from_str(&read(&format!("{pb}.json"))).unwrap();
    assert_ne!(ha["manifest_sha256"], hb["manifest_sha256"]);
}

fn assert_invalid(body: &str) {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, body).unwrap();
    let out = dir.path().join("bad").to_string_lossy().into_owned();
    let o = rmpu(&["run", "--manifest", p.to_str().unwrap(), "--out", &out]);
    assert_eq!(code(&o), 2);
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["error"]["kind"], "invalid_manifest", "{v}");
    assert!(!v["error"]["message"].as_str().unwrap().is_empty());
}

#[test]
fn invalid_manifests_rejected() {
    assert_invalid(r#"{"schema_version": 2, "quantity": "genus_counts", "grid": {"k": [2]}}"#);
    assert_invalid(r#"{"schema_version": 1, "quantity": "genus_counts", "grid": {"k": [2]}, "extra": 1}"#);
    assert_invalid(r#"{"schema_version": 1, "quantity": "genus_counts", "grid": {"k": [2], "q": [1]}}"#);
    assert_invalid(r#"{"schema_version": 1, "quantity": "volume"}"#);
    assert_invalid(r#"{"schema_version": 1, "quantity": "otoc_rmpu", "grid": {"k": [2], "d": [2], "n": [2], "r": [1]}}"#);
    assert_invalid(r#"{"schema_version": 1, "quantity": "frame_potential", "grid": {"k": [2], "d": [2], "n": [2]}}"#);
    assert_invalid("not json");
}

#[test]
fn missing_manifest_is_error() {
    let o = rmpu(&["run", "--manifest", "/nonexistent/manifest.json"]);
    assert_eq!(code(&o), 2);
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["error"]["kind"], "error");
}
