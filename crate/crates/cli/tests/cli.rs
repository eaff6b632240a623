use std::path::Path;
use std::process::{Command, Output};

fn truncshor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_truncshor"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn orbit_listing() {
    let out = truncshor(&["orbit", "--N", "21", "--a", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("r = 6"));
    assert!(text.contains("orbit: [1, 2, 4, 8, 16, 11]"));

    let out = truncshor(&["orbit", "--N", "33", "--a", "7", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["r"], 10);
}

#[test]
fn orbit_cycles() {
    let out = truncshor(&["orbit", "--N", "21", "--a", "2", "--powers", "2"]);
    assert!(stdout(&out).contains("U^2: [1, 4, 16, 1] + [2, 8, 11, 2]"));
}

#[test]
fn shared_factor_in_base_is_reported() {
    let out = truncshor(&["orbit", "--N", "21", "--a", "7"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("factors 7 x 3"));
}

#[test]
fn validation_errors_exit_2() {
    assert_eq!(truncshor(&["orbit", "--N", "20", "--a", "3"]).status.code(), Some(2));
    assert_eq!(truncshor(&["run", "--N", "21", "--a", "2", "--m", "40"]).status.code(), Some(2));
    assert_eq!(
        truncshor(&["run", "--N", "21", "--a", "2", "--trnc-lv", "6"]).status.code(),
        Some(2)
    );
    // study and factor refuse to run without a seed
    assert_eq!(truncshor(&["factor", "--N", "21", "--a", "2"]).status.code(), Some(2));
    assert_eq!(truncshor(&["study", "--N", "21", "--a", "2"]).status.code(), Some(2));
    assert_eq!(
        truncshor(&["study", "--N", "21", "--a", "2", "--seed", "1", "--trnc-lv", "4:2"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn factor_reports_seven_times_three() {
    let out = truncshor(&["factor", "--N", "21", "--a", "2", "--m", "5", "--seed", "1"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("21 = 7 x 3"));

    let out = truncshor(&[
        "factor", "--N", "247", "--a", "2", "--m", "10", "--trnc-lv", "25", "--seed", "3", "--format", "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let mut f = [v["factors"][0].as_u64().unwrap(), v["factors"][1].as_u64().unwrap()];
    f.sort();
    assert_eq!(f, [13, 19]);
}

#[test]
fn no_factors_within_cap_exits_3() {
    let out = truncshor(&[
        "factor", "--N", "21", "--a", "2", "--m", "5", "--trnc-lv", "5", "--max-tries", "1", "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn factor_is_deterministic() {
    let args = ["factor", "--N", "33", "--a", "7", "--m", "6", "--seed", "9"];
    assert_eq!(stdout(&truncshor(&args)), stdout(&truncshor(&args)));
}

#[test]
fn synth_writes_one_file_set_per_distinct_power() {
    let dir = tempfile::tempdir().unwrap();
    let out = truncshor(&[
        "synth",
        "--N",
        "21",
        "--a",
        "2",
        "--powers",
        "1,2,4,8,16",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 9, "{names:?}");
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("N21_a2_U2_t0.cert.json")).unwrap()).unwrap();
    assert_eq!(cert["powers"], serde_json::json!([2, 8]));
    assert_eq!(cert["matches_orbit_action"], true);
    assert_eq!(cert["cycles"], serde_json::json!([[1, 4, 16], [2, 8, 11]]));
    let qasm = std::fs::read_to_string(dir.path().join("N21_a2_U4_t0.qasm")).unwrap();
    assert!(qasm.starts_with("OPENQASM 3.0;\n"));
}

#[test]
fn synth_truncated_keeps_one_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = truncshor(&[
        "synth", "--N", "21", "--a", "2", "--powers", "1", "--trnc-lv", "5", "--format", "json", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let circuit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("N21_a2_U1_t5.json")).unwrap()).unwrap();
    let levels = circuit["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 6);
    assert_eq!(levels.iter().filter(|l| !l.as_array().unwrap().is_empty()).count(), 1);
    assert!(!dir.path().join("N21_a2_U1_t5.qasm").exists());
}

#[test]
fn synth_certificates_follow_orbit_for_247() {
    let dir = tempfile::tempdir().unwrap();
    let out = truncshor(&["synth", "--N", "247", "--a", "2", "--m", "10", "--format", "json", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("N247_a2_U4_t0.cert.json")).unwrap()).unwrap();
    assert_eq!(cert["powers"], serde_json::json!([4, 256]));
    assert_eq!(cert["matches_orbit_action"], true);
    assert_eq!(cert["cycles"][0], serde_json::json!([1, 16, 9, 144, 81, 61, 235, 55, 139]));
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn run_histogram_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hist.csv");
    let out = truncshor(&[
        "run", "--N", "21", "--a", "2", "--m", "5", "--shots", "4096", "--seed", "7", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&path);
    let total: u64 = rows.iter().map(|r| r[4].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 4096);
    let mut factoring: Vec<(u64, u64)> = rows
        .iter()
        .filter(|r| r[5] == "1")
        .map(|r| (r[4].parse().unwrap(), r[0].parse().unwrap()))
        .collect();
    factoring.sort_by(|a, b| b.cmp(a));
    let mut top = [factoring[0].1, factoring[1].1];
    top.sort();
    assert_eq!(top, [5, 27]);
}

#[test]
fn run_exact_only_and_dense_backend_agree() {
    let fast = stdout(&truncshor(&["run", "--N", "21", "--a", "2", "--m", "5"]));
    let dense = stdout(&truncshor(&["run", "--N", "21", "--a", "2", "--m", "5", "--backend", "dense"]));
    let parse = |text: &str| -> Vec<(u64, f64, u64)> {
        text.lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (f[0].parse().unwrap(), f[3].parse().unwrap(), f[4].parse().unwrap())
            })
            .collect()
    };
    let (a, b) = (parse(&fast), parse(&dense));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.0, y.0);
        assert!((x.1 - y.1).abs() < 1e-9);
        assert_eq!(x.2, 0);
    }
}

#[test]
fn study_writes_csv_and_json_mirror() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("study.csv");
    let out = truncshor(&[
        "--quiet", "study", "--N", "21", "--a", "2", "--m", "5", "--trnc-lv", "0:5", "--num-it", "20", "--seed",
        "4", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&path);
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[0] == "21" && r[2] == "6" && r[6] == "20"));
    let mirror: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("study.json")).unwrap()).unwrap();
    assert_eq!(mirror["rows"][0]["result"]["tries"].as_array().unwrap().len(), 20);
    // one JSON-lines progress record per row
    let progress = String::from_utf8(out.stderr).unwrap();
    assert_eq!(progress.lines().count(), 6);
    for line in progress.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(rec["event"], "study_row");
    }
}

#[test]
fn study_is_deterministic_for_one_iteration() {
    let args = ["study", "--N", "21", "--a", "2", "--m", "5", "--trnc-lv", "0:2", "--num-it", "1", "--seed", "11"];
    let first = truncshor(&args);
    assert_eq!(stdout(&first).lines().count(), 4);
    assert_eq!(stdout(&first), stdout(&truncshor(&args)));
}
