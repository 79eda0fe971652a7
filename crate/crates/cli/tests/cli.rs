use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use genmetrics::{analytic_fid, write_features, FeatureSet, GaussianSpec};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_genmetrics"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_code(out: &Output) -> String {
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    v["error"]["code"].as_str().unwrap().to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Deterministic pseudo-random rows without duplicates.
fn sample_set(seed: u32, count: usize, dim: usize) -> FeatureSet {
    let mut state = seed.wrapping_mul(2_654_435_761).wrapping_add(1);
    let data = (0..count * dim)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 17;
            state ^= state << 5;
            (state as f32 / u32::MAX as f32) * 2.0 - 1.0
        })
        .collect();
    FeatureSet::new(data, count, dim, "x").unwrap()
}

fn write_set(dir: &Path, name: &str, set: &FeatureSet) -> PathBuf {
    let path = dir.join(name);
    write_features(set, &path).unwrap();
    path
}

#[test]
fn same_file_gives_zero_fid_and_full_scores() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_set(dir.path(), "a.gmf", &sample_set(1, 300, 8));
    let v = stdout_json(&run(&["report", "--source", p(&a), "--target", p(&a)]));
    let row = &v["rows"][0];
    assert!(row["fid"].as_f64().unwrap().abs() <= 1e-9);
    assert_eq!(row["precision"].as_f64(), Some(1.0));
    assert_eq!(row["recall"].as_f64(), Some(1.0));
    assert_eq!(row["source"].as_str(), Some("a"));
}

#[test]
fn zero_norm_row_with_normalize_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = FeatureSet::from_rows(&[[1.0f32, 2.0], [0.0, 0.0], [3.0, 1.0]], "bad").unwrap();
    let a = write_set(dir.path(), "bad.gmf", &bad);
    let out = run(&["fid", "--source", p(&a), "--target", p(&a), "--normalize"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_code(&out), "zero_norm_row");
    assert!(out.stdout.is_empty());
    let out = run(&["normalize", p(&a), p(&dir.path().join("out.gmf"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_files_match_analytic_fid() {
    let dir = tempfile::tempdir().unwrap();
    let specs = [
        GaussianSpec {
            mean: vec![0.0, 0.0, 0.0],
            cov: vec![vec![1.0, 0.3, 0.0], vec![0.3, 1.0, 0.2], vec![0.0, 0.2, 0.5]],
            seed: 1,
            count: 20_000,
        },
        GaussianSpec {
            mean: vec![1.0, -0.5, 0.25],
            cov: vec![vec![2.0, 0.0, 0.1], vec![0.0, 0.5, 0.0], vec![0.1, 0.0, 1.0]],
            seed: 2,
            count: 20_000,
        },
    ];
    let mut files = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let cfg = dir.path().join(format!("spec{i}.json"));
        std::fs::write(&cfg, serde_json::to_string(spec).unwrap()).unwrap();
        let out_path = dir.path().join(format!("g{i}.gmf"));
        let v = stdout_json(&run(&["synth", "--config", p(&cfg), "--output", p(&out_path)]));
        assert_eq!(v["label"].as_str(), Some(format!("synth:chacha20+box-muller:seed={}", i + 1).as_str()));
        files.push(out_path);
    }
    let want = analytic_fid(&specs[0], &specs[1]).unwrap();
    let v = stdout_json(&run(&["fid", "--source", p(&files[0]), "--target", p(&files[1])]));
    let got = v["fid"].as_f64().unwrap();
    assert!((got - want).abs() <= 0.05 * want, "{got} vs {want}");
    assert_eq!(v["fid_mode"].as_str(), Some("product"));
}

#[test]
fn synth_rejects_indefinite_covariance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"mean":[0,0],"cov":[[1,2],[2,1]],"seed":0,"count":10}"#).unwrap();
    let out = run(&["synth", "--config", p(&cfg), "--output", p(&dir.path().join("x.gmf"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_code(&out), "invalid_config");
}

#[test]
fn inspect_reports_shape_and_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_set(dir.path(), "a.gmf", &sample_set(3, 10, 4));
    let v = stdout_json(&run(&["inspect", p(&a)]));
    assert_eq!(v["count"].as_u64(), Some(10));
    assert_eq!(v["dim"].as_u64(), Some(4));
    assert_eq!(v["file_bytes"].as_u64(), Some(28 + 160));
    assert_eq!(v["unit_normalized"].as_bool(), Some(false));

    let normed = dir.path().join("n.gmf");
    stdout_json(&run(&["normalize", p(&a), p(&normed)]));
    let v = stdout_json(&run(&["inspect", p(&normed)]));
    assert_eq!(v["unit_normalized"].as_bool(), Some(true));

    let bad = dir.path().join("bad.gmf");
    std::fs::write(&bad, b"NOTMAGIC0000000000000000000000000000").unwrap();
    let out = run(&["inspect", p(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_code(&out), "bad_magic");

    let out = run(&["inspect", p(&dir.path().join("missing.gmf"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_code(&out), "io");
}

#[test]
fn kid_and_pr_subcommands_honour_flags() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_set(dir.path(), "a.gmf", &sample_set(4, 120, 5));
    let b = write_set(dir.path(), "b.gmf", &sample_set(5, 90, 5));
    let v = stdout_json(&run(&[
        "kid", "--source", p(&a), "--target", p(&b), "--kid-subset-size", "30", "--kid-subsets", "7", "--seed", "9",
    ]));
    assert_eq!(v["subset_size"].as_u64(), Some(30));
    assert_eq!(v["num_subsets"].as_u64(), Some(7));
    let again = stdout_json(&run(&[
        "kid", "--source", p(&a), "--target", p(&b), "--kid-subset-size", "30", "--kid-subsets", "7", "--seed", "9",
    ]));
    assert_eq!(v, again);
    let v = stdout_json(&run(&["kid", "--source", p(&a), "--target", p(&b)]));
    assert_eq!(v["subset_size"].as_u64(), Some(90));

    let v = stdout_json(&run(&["pr", "--source", p(&a), "--target", p(&b), "--k", "1", "--q", "2"]));
    assert_eq!(v["k"].as_u64(), Some(1));
    assert_eq!(v["q"].as_f64(), Some(2.0));
    let out = run(&["pr", "--source", p(&a), "--target", p(&b), "--k", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_report_renders_markdown() {
    let dir = tempfile::tempdir().unwrap();
    write_set(dir.path(), "real.gmf", &sample_set(6, 200, 6));
    write_set(dir.path(), "g1.gmf", &sample_set(7, 200, 6));
    let cfg = serde_json::json!({
        "target": "real.gmf",
        "rows": [
            {"extractor": "E", "source": "G1", "source_path": "g1.gmf"},
            {"extractor": "E", "source": "Stored", "metrics":
                {"fid": 0.0, "kid_mean": -1.0, "kid_stddev": 0.0, "precision": 1.0, "recall": 1.0}}
        ],
        "groups": [[0, 1]],
        "kid": {"num_subsets": 5}
    });
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = run(&["report", "--config", p(&path), "--format", "markdown", "--scale-1000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let md = String::from_utf8(out.stdout).unwrap();
    assert!(md.contains("| Feature Extractor | Source Data | FID* ↓ | KID* ↓ | P ↑ | R ↑ |"), "{md}");
    assert!(md.contains("| E | Stored | ***0.000*** | ***-1000.0000*** |"), "{md}");
}

#[test]
fn thread_override_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_set(dir.path(), "a.gmf", &sample_set(8, 600, 4));
    let b = write_set(dir.path(), "b.gmf", &sample_set(9, 600, 4));
    let args = ["report", "--source", p(&a), "--target", p(&b), "--kid-subsets", "4"];
    let out = bin().args(args).env("GENMETRICS_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_code(&out), "invalid_config");
    let one = bin().args(args).env("GENMETRICS_THREADS", "1").output().unwrap();
    let four = bin().args(args).env("GENMETRICS_THREADS", "4").output().unwrap();
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn mismatched_dimensions_exit_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_set(dir.path(), "a.gmf", &sample_set(1, 20, 3));
    let b = write_set(dir.path(), "b.gmf", &sample_set(2, 20, 4));
    let out = run(&["fid", "--source", p(&a), "--target", p(&b)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_code(&out), "dimension_mismatch");
}
