//! Shared helpers for driving the `cqosc` binary in tests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Output;

pub fn run_cqosc(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_cqosc"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn run_command(subcommand: &str, config: &Path, out_dir: &Path) -> Output {
    run_cqosc(&[
        subcommand,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ])
}

pub fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).expect("config written");
    path
}

/// Parse a CSV with a header row into named f64 columns (non-numeric cells
/// are skipped, which drops e.g. the `method` column).
pub fn read_csv_columns(path: &Path) -> BTreeMap<String, Vec<f64>> {
    let text = std::fs::read_to_string(path).expect("csv readable");
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .expect("header")
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let mut cols: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        for (name, cell) in header.iter().zip(line.split(',')) {
            if let Ok(v) = cell.parse::<f64>() {
                cols.entry(name.clone()).or_default().push(v);
            }
        }
    }
    cols
}

#[allow(dead_code)] // used by the acceptance suite only
pub fn read_dir_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).expect("dir readable") {
        let entry = entry.expect("entry");
        if entry.file_type().expect("type").is_file() {
            out.insert(
                entry.file_name().to_string_lossy().to_string(),
                std::fs::read(entry.path()).expect("file readable"),
            );
        }
    }
    out
}
