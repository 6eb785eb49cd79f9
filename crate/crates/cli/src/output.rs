//! In-memory output files, written together in a final phase.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Numeric CSV with a `# config_hash:` first line.
pub struct Csv {
    text: String,
    width: usize,
    rows: usize,
}

impl Csv {
    pub fn new(hash: &str, header: &[String]) -> Self {
        let mut text = format!("# config_hash: {hash}\n");
        text.push_str(&header.join(","));
        text.push('\n');
        Self {
            text,
            width: header.len(),
            rows: 0,
        }
    }

    /// Appends one row; `{}` on `f64` is the shortest round-trip decimal.
    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.width);
        for (k, v) in values.iter().enumerate() {
            if k > 0 {
                self.text.push(',');
            }
            write!(self.text, "{v}").unwrap();
        }
        self.text.push('\n');
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Column label for a penalty strength, e.g. `x_eps_0.05`.
pub fn eps_label(prefix: &str, eps: f64) -> String {
    format!("{prefix}_eps_{eps}")
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
    bytes: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_hash: &'a str,
    config: &'a Value,
    files: Vec<FileEntry>,
}

/// Files produced by one command.
pub struct Bundle {
    hash: String,
    files: Vec<(String, Vec<u8>)>,
}

impl Bundle {
    pub fn new(hash: &str) -> Self {
        Self {
            hash: hash.to_string(),
            files: Vec::new(),
        }
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn add_csv(&mut self, name: impl Into<String>, csv: Csv) {
        self.files.push((name.into(), csv.into_bytes()));
    }

    /// Pretty JSON with `config_hash` injected at the top level.
    pub fn add_json(&mut self, name: impl Into<String>, value: &impl Serialize) {
        let mut v = serde_json::to_value(value).expect("outputs serialize");
        if let Value::Object(map) = &mut v {
            map.insert("config_hash".into(), Value::String(self.hash.clone()));
        }
        let mut bytes = serde_json::to_vec_pretty(&v).expect("outputs serialize");
        bytes.push(b'\n');
        self.files.push((name.into(), bytes));
    }

    /// Writes every file and then `manifest.json` listing their checksums.
    pub fn write(self, dir: &Path, command: &str, config: &Value) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let mut written = Vec::new();
        let mut entries = Vec::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
            }
            std::fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
            entries.push(FileEntry {
                path: name.clone(),
                sha256: hex::encode(Sha256::digest(bytes)),
                bytes: bytes.len(),
            });
            written.push(path);
        }
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config_hash: &self.hash,
            config,
            files: entries,
        };
        let path = dir.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        written.push(path);
        Ok(written)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut c = Csv::new("abc", &["t".into(), eps_label("x", 0.05)]);
        c.row(&[0.1, 1.0 / 3.0]);
        let text = String::from_utf8(c.into_bytes()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# config_hash: abc");
        assert_eq!(lines[1], "t,x_eps_0.05");
        let v: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 1.0 / 3.0);
    }
}
