use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qpmseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpmseg"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, count: usize, extra: &[&str]) {
    let n = count.to_string();
    let mut args = vec!["phantom", "generate", "--out", s(dir), "--count", &n, "--seed", "7"];
    args.extend_from_slice(extra);
    let out = qpmseg(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generate_segment_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    generate(&data, 4, &[]);

    let out = qpmseg(&["segment", s(&data), "--out", s(&run), "--workers", "2", "--overlays", "--stats-dump"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["features.csv", "features.jsonl", "manifest.json", "regions.jsonl", "diagnostics.log", "stats.csv"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    assert_eq!(fs::read_dir(run.join("overlays")).unwrap().count(), 4);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    let cells = manifest["counts"]["cells"].as_u64().unwrap() as usize;
    let csv = fs::read_to_string(run.join("features.csv")).unwrap();
    assert_eq!(csv.lines().count(), cells + 1);
    assert!(csv.starts_with("image_id,cell_id,threshold_rad,"));
    let stats = fs::read_to_string(run.join("stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 5);

    let out = qpmseg(&["phantom", "evaluate", "--truth", s(&data.join("truth")), "--run", s(&run)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("(1) missed cell") && table.contains("%"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("error_report.json")).unwrap()).unwrap();
    assert_eq!(report["gt_cells"].as_u64().unwrap(), 20);
}

#[test]
fn csv_is_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, 6, &[]);
    let mut outputs = Vec::new();
    for w in ["1", "4", "8"] {
        let run = tmp.path().join(format!("run{w}"));
        let out = qpmseg(&["segment", s(&data), "--out", s(&run), "--workers", w]);
        assert!(out.status.success());
        outputs.push((fs::read(run.join("features.csv")).unwrap(), fs::read(run.join("regions.jsonl")).unwrap()));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn tiff_input_needs_calibration_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, 2, &["--format", "tiff"]);
    let run = tmp.path().join("run");
    let out = qpmseg(&["segment", s(&data), "--out", s(&run)]);
    assert_eq!(out.status.code(), Some(4));
    let out =
        qpmseg(&["segment", s(&data), "--out", s(&run), "--pixel-size-um", "0.5", "--wavelength-nm", "528"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn empty_directory_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qpmseg(&["segment", s(tmp.path()), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn zero_background_exits_3_unless_fallback() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let params = tmp.path().join("p.toml");
    fs::write(&params, "background_rad = 0.0\nnoise_sigma_rad = 0.0\ncell_count = 0\ndebris_count = 0\n").unwrap();
    generate(&data, 2, &["--params", s(&params)]);
    let run = tmp.path().join("run");
    let out = qpmseg(&["segment", s(&data), "--out", s(&run)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--fallback-threshold"));
    let out = qpmseg(&["segment", s(&data), "--out", s(&run), "--fallback-threshold", "0.1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(run.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"fallback_used\": true"));
}

#[test]
fn bad_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, 1, &[]);
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "no_such_field = 1\n").unwrap();
    let out = qpmseg(&["segment", s(&data), "--out", s(&tmp.path().join("o")), "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));

    let out = Command::new(env!("CARGO_BIN_EXE_qpmseg"))
        .args(["segment", s(&data), "--out", s(&tmp.path().join("o"))])
        .env("QPMSEG_R_MIN_UM", "-1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn env_disables_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, 1, &[]);
    let run = tmp.path().join("run");
    let out = Command::new(env!("CARGO_BIN_EXE_qpmseg"))
        .args(["segment", s(&data), "--out", s(&run), "--workers", "1"])
        .env("QPMSEG_PLAUSIBILITY_CHECKS", "false")
        .output()
        .unwrap();
    assert!(out.status.success());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["plausibility_checks"], false);
    assert_eq!(manifest["counts"]["cells"], manifest["counts"]["candidates"]);
}

#[test]
fn bench_reports_per_image_time() {
    let tmp = tempfile::tempdir().unwrap();
    let json = tmp.path().join("b.json");
    let out = qpmseg(&["phantom", "bench", "--count", "3", "--repetitions", "3", "--json", s(&json)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("per image"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(report["run_s"].as_array().unwrap().len(), 3);
}
