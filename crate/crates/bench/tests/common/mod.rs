#![allow(dead_code)]

use std::path::{Path, PathBuf};

use aquaseg_bench::RunConfig;
use serde_json::Value;

/// Shared with the acceptance suite in `crates/verify`.
pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../bench/tests/fixtures/e2e")
}

pub fn fixture_manifest() -> PathBuf {
    fixture_dir().join("manifest.json")
}

/// Copies the fixture into a fresh temporary directory so a test can damage it.
pub fn fixture_copy() -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    copy_tree(&fixture_dir(), tmp.path());
    let manifest = tmp.path().join("manifest.json");
    (tmp, manifest)
}

fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

pub fn pinned() -> Value {
    let text = std::fs::read_to_string(fixture_dir().join("pinned_metrics.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Run configuration matching one of the oracle's pinned configurations.
pub fn pinned_config(name: &str, manifest: &Path) -> RunConfig {
    let all = pinned();
    let c = &all["configs"][name];
    let mut cfg = RunConfig {
        manifest_path: manifest.to_path_buf(),
        enable_gmg: c["gmg"].as_bool().unwrap(),
        enable_csa: c["csa"].as_bool().unwrap(),
        enable_templates: c["templates"].as_bool().unwrap(),
        ..RunConfig::default()
    };
    cfg.gmg.beta = c["beta"].as_f64().unwrap();
    cfg.gmg.gamma = c["gamma"].as_f64().unwrap();
    cfg.gmg.geo_stage = c["stage"].as_u64().unwrap() as u8;
    cfg.fusion.w_max = c["w_max"].as_f64().unwrap();
    cfg.fusion.tau = c["tau"].as_f64().unwrap();
    cfg
}

pub fn pinned_report(name: &str) -> Value {
    pinned()["reports"][name].clone()
}

/// Largest absolute difference between two reports of the same shape.
/// Panics when their structure, keys, names or null pattern differ.
pub fn max_report_diff(actual: &Value, expected: &Value) -> f64 {
    match (actual, expected) {
        (Value::Number(a), Value::Number(b)) => (a.as_f64().unwrap() - b.as_f64().unwrap()).abs(),
        (Value::Object(a), Value::Object(b)) => {
            let ka: Vec<_> = a.keys().collect();
            let kb: Vec<_> = b.keys().collect();
            assert_eq!(ka, kb, "key order differs");
            a.iter()
                .map(|(k, v)| max_report_diff(v, &b[k]))
                .fold(0.0, f64::max)
        }
        (Value::Array(a), Value::Array(b)) => {
            assert_eq!(a.len(), b.len());
            a.iter().zip(b).map(|(x, y)| max_report_diff(x, y)).fold(0.0, f64::max)
        }
        (a, b) => {
            assert_eq!(a, b);
            0.0
        }
    }
}
