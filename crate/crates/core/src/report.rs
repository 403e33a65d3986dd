//! Output directory handling: CSV files carrying a manifest reference, the
//! run manifest, and `.partial` renaming after a failed stage.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const PARTIAL_SUFFIX: &str = ".partial";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Six-decimal fixed formatting used in every table.
pub fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

/// Collects outputs written into one directory during a command.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    input_hash: String,
    written: Vec<OutputRecord>,
}

impl OutputDir {
    pub fn create(dir: &Path, input_hash: &str) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), input_hash: input_hash.to_string(), written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[OutputRecord] {
        &self.written
    }

    /// Writes `# manifest=.. input_hash=..`, the header, then `rows`.
    pub fn write_csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut buf = format!("# manifest={MANIFEST_NAME} input_hash={}\n", self.input_hash).into_bytes();
        {
            let mut w = csv::WriterBuilder::new().from_writer(&mut buf);
            w.write_record(header)?;
            for row in rows {
                w.write_record(&row)?;
            }
            w.flush().map_err(|e| Error::io(self.dir.join(name), e))?;
        }
        self.write_bytes(name, &buf)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.written.retain(|r| r.file != name);
        self.written.push(OutputRecord { file: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    /// Writes the manifest: config echo, seed, input hash and output digests.
    pub fn write_manifest(&mut self, command: &str, seed: u64, config: &serde_json::Value) -> Result<()> {
        let m = serde_json::json!({
            "command": command,
            "seed": seed,
            "input_hash": self.input_hash,
            "package_version": env!("CARGO_PKG_VERSION"),
            "outputs": self.written,
            "config": config,
        });
        let mut text = serde_json::to_string_pretty(&m).map_err(|e| Error::Config(e.to_string()))?;
        text.push('\n');
        let path = self.dir.join(MANIFEST_NAME);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Renames every output written so far to `<name>.partial`.
    pub fn mark_partial(&self) -> Result<()> {
        for r in &self.written {
            let from = self.dir.join(&r.file);
            let to = self.dir.join(format!("{}{PARTIAL_SUFFIX}", r.file));
            fs::rename(&from, &to).map_err(|e| Error::io(&from, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_manifest_line_and_header() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(tmp.path(), "abc").unwrap();
        out.write_csv("t.csv", &["a", "b"], vec![vec!["1".into(), "x,y".into()]]).unwrap();
        let text = fs::read_to_string(tmp.path().join("t.csv")).unwrap();
        assert_eq!(text, "# manifest=manifest.json input_hash=abc\na,b\n1,\"x,y\"\n");
        out.mark_partial().unwrap();
        assert!(tmp.path().join("t.csv.partial").exists());
        assert!(!tmp.path().join("t.csv").exists());
    }

    #[test]
    fn fixed_format() {
        assert_eq!(fmt6(1.0 / 3.0), "0.333333");
        assert_eq!(sha256_hex(b"").len(), 64);
    }
}
