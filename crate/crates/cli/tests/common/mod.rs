#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn msm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msm"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("msm binary runs")
}

pub fn msm_ok(args: &[&str]) -> String {
    let out = msm(args);
    assert!(
        out.status.success(),
        "msm {args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes `spec` as JSON and simulates it into `dir/<name>`.
pub fn simulate(dir: &Path, name: &str, spec: &str) -> PathBuf {
    let spec_path = dir.join(format!("{name}.spec.json"));
    fs::write(&spec_path, spec).unwrap();
    let out = dir.join(name);
    msm_ok(&["simulate", "--spec", p(&spec_path), "--out", p(&out)]);
    out
}

/// Every file below `dir`, relative path paired with contents, sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = fs::read(&path).unwrap();
                files.push((path.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    files.sort();
    files
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}
