#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use popaudit::pipeline::{self, AuditConfig, AuditReport};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini")
}

pub fn fixture_config() -> AuditConfig {
    AuditConfig::from_file(fixture_dir().join("config.json")).expect("fixture config parses")
}

/// Run the fixture audit and write every report into `out`.
pub fn run_fixture(cfg: &AuditConfig, out: &Path) -> AuditReport {
    let report = pipeline::run_audit(cfg).expect("fixture audit runs");
    pipeline::emit_reports(&report, out).expect("reports are written");
    report
}

/// A CSV file as rows of `column -> value`.
pub fn read_table(path: &Path) -> Vec<HashMap<String, String>> {
    let mut reader = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let headers = reader.headers().unwrap().clone();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            headers.iter().map(String::from).zip(r.iter().map(String::from)).collect()
        })
        .collect()
}

pub fn f(row: &HashMap<String, String>, col: &str) -> f64 {
    row.get(col)
        .unwrap_or_else(|| panic!("missing column {col}"))
        .parse()
        .unwrap_or_else(|e| panic!("column {col}: {e}"))
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Every file in `dir`, by name, with its bytes.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}
