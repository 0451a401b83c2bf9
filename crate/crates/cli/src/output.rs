//! Deterministic file output: 17-significant-digit scientific floats in
//! CSV, canonical serde_json for reports, and atomic write-then-rename for
//! everything.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::CliError;

/// Fixed float formatting for CSV cells: 17 significant digits, scientific
/// notation, '.' decimal separator (e.g. 2.0000000000000000e-3).
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Collects the files a run produces, hashing them as they are written.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileRecord>,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Io(format!("creating {}: {e}", root.display())))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    /// Atomic write: temp file in the same directory, then rename.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let target = self.root.join(name);
        let tmp = self.root.join(format!("{name}.tmp-{}", std::process::id()));
        fs::write(&tmp, contents)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", tmp.display())))?;
        fs::rename(&tmp, &target)
            .map_err(|e| CliError::Io(format!("renaming to {}: {e}", target.display())))?;
        let mut hasher = Sha256::new();
        hasher.update(contents);
        self.files.push(FileRecord {
            path: name.to_string(),
            sha256: hex_bytes(&hasher.finalize()),
            bytes: contents.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut body = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::Io(format!("serializing {name}: {e}")))?;
        body.push(b'\n');
        self.write(name, &body)
    }
}

fn hex_bytes(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// CSV assembly with the fixed float format.
pub struct Csv {
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            buf: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[CsvCell]) {
        assert_eq!(cells.len(), self.columns, "column count mismatch");
        let mut first = true;
        for c in cells {
            if !first {
                self.buf.push(',');
            }
            first = false;
            match c {
                CsvCell::F(x) => self.buf.push_str(&fmt_f64(*x)),
                CsvCell::I(i) => self.buf.push_str(&i.to_string()),
                CsvCell::S(s) => self.buf.push_str(s),
            }
        }
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}

pub enum CsvCell<'a> {
    F(f64),
    I(i64),
    S(&'a str),
}
