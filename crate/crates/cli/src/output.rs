//! Output plumbing: CSV/JSON writers that record every file and its content
//! hash into a manifest. No timestamps anywhere, so identical inputs yield
//! byte-identical output trees.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tsmdp::error::{Error, Result};

/// Collects written files, their hashes, warnings and per-run failures.
#[derive(Debug, Default, Serialize)]
pub struct Manifest {
    pub config_hash: String,
    pub base_seed: u64,
    pub run_seeds: Vec<u64>,
    pub files: BTreeMap<String, String>,
    pub warnings: Vec<String>,
    pub failures: BTreeMap<String, String>,
}

pub struct OutputDir {
    root: PathBuf,
    pub manifest: Manifest,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

impl OutputDir {
    pub fn create(root: &Path, config_text: &str, base_seed: u64) -> Result<Self> {
        fs::create_dir_all(root)
            .map_err(|e| Error::Config(format!("cannot create output dir {root:?}: {e}")))?;
        let mut manifest = Manifest::default();
        manifest.config_hash = sha256_hex(config_text.as_bytes());
        manifest.base_seed = base_seed;
        Ok(Self { root: root.to_path_buf(), manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes raw bytes and records the file in the manifest.
    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, bytes)
            .map_err(|e| Error::Config(format!("cannot write {path:?}: {e}")))?;
        self.manifest.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Writes a pretty JSON document.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Config(format!("serialization error for {name}: {e}")))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes a CSV from a header and stringified rows.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
        writer
            .write_record(header)
            .and_then(|_| rows.iter().try_for_each(|row| writer.write_record(row)))
            .map_err(|e| Error::Config(format!("CSV build error for {name}: {e}")))?;
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::Config(format!("CSV flush error for {name}: {e}")))?;
        self.write_bytes(name, &bytes)
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.manifest.warnings.push(message.into());
    }

    pub fn record_failure(&mut self, key: impl Into<String>, error: &Error) {
        self.manifest.failures.insert(key.into(), error.to_string());
    }

    /// Writes the manifest itself (not listed in its own file table).
    pub fn finish(self) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Error::Config(format!("manifest serialization error: {e}")))?;
        text.push('\n');
        let path = self.root.join("manifest.json");
        fs::write(&path, text)
            .map_err(|e| Error::Config(format!("cannot write {path:?}: {e}")))?;
        Ok(())
    }
}

/// Canonical float formatting for CSV cells (shortest round-trip form).
pub fn fmt_f64(value: f64) -> String {
    if value.is_infinite() {
        if value > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{value}")
    }
}
