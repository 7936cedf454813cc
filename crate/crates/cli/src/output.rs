//! Unquoted CSV tables and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            debug_assert!(r.iter().all(|f| !f.contains([',', '"', '\n'])));
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip decimal; `inf`, `-inf` and `NaN` spelled out.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:?}")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_digest: String,
    pub seed: u64,
    pub experiment: String,
    pub started: String,
    pub finished: String,
    pub status: String,
    pub files: Vec<FileEntry>,
}

/// Writes `name` under `dir` and records it for the manifest.
pub fn write_file(dir: &Path, name: &str, contents: &[u8], files: &mut Vec<FileEntry>) -> std::io::Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    files.push(FileEntry {
        name: name.to_string(),
        sha256: sha256_hex(contents),
    });
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_plain() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![num(0.1), num(f64::INFINITY)]);
        t.push(vec![num(1e-300), num(f64::NAN)]);
        assert_eq!(t.to_csv(), "a,b\n0.1,inf\n1e-300,NaN\n");
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2f64.powi(-10), 123456.789, -5e-17] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
