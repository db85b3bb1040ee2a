//! Acceptance: byte-identical reports for identical (config, seed), the
//! exit-code contract, and the committed example configs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_treeirs")
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("workspace root")
}

fn config(name: &str) -> String {
    workspace_root()
        .join("configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_twice_identical(args: &[&str]) -> Output {
    let first = run(args);
    let second = run(args);
    assert_eq!(
        first.stdout, second.stdout,
        "output of {args:?} differs between consecutive runs"
    );
    assert_eq!(first.status.code(), second.status.code());
    first
}

#[test]
fn c16_determinism_and_exit_codes() {
    let start = Instant::now();

    // Sampling: identical bytes, and the non-normal subgroup has exactly
    // two conjugates while the normal one collapses to a point mass.
    let sample_uniform = config("sample_uniform.json");
    let out = run_twice_identical(&["sample", "--config", &sample_uniform]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["support_size"], 2);

    let sample_normal = config("sample_normal.json");
    let out = run_twice_identical(&["sample", "--config", &sample_normal]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["support_size"], 1);
    assert_eq!(doc["max_frequency"]["rational"], "1");

    // The fixed-ray config echoes its per-subtree sampler metadata.
    let sample_ray = config("sample_fixed_ray.json");
    let out = run_twice_identical(&["sample", "--config", &sample_ray]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["sampler"]["type"], "fixed_ray");
    assert_eq!(doc["sampler"]["subtrees"][0]["top_depth"], 1);
    assert_eq!(doc["sampler"]["subtrees"][0]["top"], "full");

    // The committed verification suite: deterministic, no hard failures.
    let verify_suite = config("verify_suite.json");
    let out = run_twice_identical(&["verify", "--config", &verify_suite]);
    assert_eq!(out.status.code(), Some(0), "suite failed: {:?}", out);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["failures"], 0);
    assert_eq!(doc["reports"].as_array().unwrap().len(), 11);

    // Distances, orbits and decompositions are pure and deterministic.
    let sh0 = r#"{"d":2,"depth":2,"levels":[[""],["0"],["00","01"]]}"#;
    let sh1 = r#"{"d":2,"depth":2,"levels":[[""],["1"],["10","11"]]}"#;
    let out = run_twice_identical(&["distance", "--kind", "set", "--a", sh0, "--b", sh1]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["rational"], "1");

    let out = run_twice_identical(&["distance", "--kind", "ray", "--a", "000", "--b", "001"]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["rational"], "1/4");

    let id = r#"{"d":2,"depth":0,"perms":{}}"#;
    let root_swap = r#"{"d":2,"depth":1,"perms":{"":[1,0]}}"#;
    let out = run_twice_identical(&["distance", "--kind", "aut", "--a", id, "--b", root_swap]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["rational"], "1");

    let gens = r#"[{"d":2,"depth":2,"perms":{"0":[1,0]}}]"#;
    let out = run_twice_identical(&["orbits", "--generators", gens, "--level", "2"]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        doc["partition"]["blocks"],
        serde_json::json!([["00", "01"], ["10"], ["11"]])
    );

    let ray = r#"{"d":2,"depth":3,"levels":[[""],["1"],["11"],["111"]]}"#;
    let out = run_twice_identical(&["decompose", "--set", ray]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["subtrees"].as_array().unwrap().len(), 4);
    assert_eq!(doc["subtrees"][1]["hanging_roots"], serde_json::json!(["10"]));

    let elapsed = start.elapsed().as_millis();
    println!("acceptance 16 byte-identical reports and exit codes: PASS ({elapsed} ms, budget 60000 ms)");
    assert!(elapsed <= 60_000, "criterion 16 exceeded its budget: {elapsed} ms");
}

#[test]
fn exit_code_contract() {
    // Usage errors exit 2.
    let out = run(&["verify", "--checks", "no_such_check"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["sample"]);
    assert_eq!(out.status.code(), Some(2), "sample without a sampler is a config error");

    // Shipped negative controls make the run exit 4.
    let negative = config("negative_controls.json");
    let out = run(&["verify", "--config", &negative]);
    assert_eq!(out.status.code(), Some(4));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["failures"], 4);

    // A statistical check below its trial budget is inconclusive: accepted
    // by default, rejected under --strict.
    let inconclusive = r#"{
        "d": 2, "depth": 3, "seed": 5,
        "checks": [{"name": "green_ray_fixation",
                    "params": {"set": null, "max_depth": 3, "trials": 50}}]
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inconclusive.json");
    std::fs::write(&path, inconclusive).unwrap();
    let path = path.to_string_lossy().into_owned();

    let out = run(&["verify", "--config", &path]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["inconclusive"], 1);

    let out = run(&["verify", "--config", &path, "--strict"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn enumeration_cap_exits_three() {
    // A depth-5 binary ambient has 2^31 elements; preparing the stabilizer
    // sampler hits the order cap.
    let config = r#"{
        "d": 2, "depth": 5, "seed": 1, "trials": 1,
        "sampler": {
            "type": "stabilizer_of_random_set",
            "ambient": {"d": 2, "depth": 5, "flavor": "symmetric"},
            "set": {"d": 2, "depth": 5,
                    "levels": [[""],["1"],["11"],["111"],["1111"],["11111"]]},
            "mode": "pointwise"
        }
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cap.json");
    std::fs::write(&path, config).unwrap();
    let out = run(&["sample", "--config", &path.to_string_lossy()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn flags_override_config() {
    let sample_uniform = config("sample_uniform.json");
    let base = run(&["sample", "--config", &sample_uniform]);
    let reseeded = run(&["sample", "--config", &sample_uniform, "--seed", "8"]);
    assert_ne!(base.stdout, reseeded.stdout);
    let doc: serde_json::Value = serde_json::from_slice(&reseeded.stdout).unwrap();
    assert_eq!(doc["seed"], 8);

    let trimmed = run(&["sample", "--config", &sample_uniform, "--trials", "10"]);
    let doc: serde_json::Value = serde_json::from_slice(&trimmed.stdout).unwrap();
    assert_eq!(doc["trials"], 10);

    // CSV of the flat histogram.
    let csv = run(&["sample", "--config", &sample_uniform, "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("fingerprint_hash,count\n"));
    assert_eq!(text.lines().count(), 3);
}
