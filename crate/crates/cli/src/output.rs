//! Output directory handling: atomic writes, content hashes and the run
//! manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nc_sigma::instanton::{DualityBranch, CHARGE_SIGN, INSTANTON_BRANCH};
use nc_sigma::module::HermitianVariant;
use nc_sigma::tolerances::Tolerances;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Config(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: Option<f64>,
    pub limit: Option<f64>,
    pub detail: Option<String>,
}

impl Check {
    /// `value ≤ limit`.
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.to_string(),
            pass: value <= limit,
            value: Some(value),
            limit: Some(limit),
            detail: None,
        }
    }

    pub fn flag(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            pass,
            value: None,
            limit: None,
            detail: Some(detail.into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub duality_branch: DualityBranch,
    pub charge_sign: i64,
    /// `(a, b)` with `a r + b q = 1`, when a module is involved.
    pub bezout: Option<[i64; 2]>,
    pub hermitian_variant: HermitianVariant,
}

impl Conventions {
    pub fn new(bezout: Option<[i64; 2]>, variant: HermitianVariant) -> Self {
        Self {
            duality_branch: INSTANTON_BRANCH,
            charge_sign: CHARGE_SIGN,
            bezout,
            hermitian_variant: variant,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub library_version: String,
    pub command: String,
    pub config: RunConfig,
    pub conventions: Conventions,
    pub tolerances: Tolerances,
    pub wall_clock_seconds: f64,
    pub exit_code: i32,
    pub checks: Vec<Check>,
    pub files: Vec<FileEntry>,
}

/// Collects data files for one run and finally writes the manifest.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.root.join(rel), bytes)?;
        self.files.push(FileEntry {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> Result<(), CliError> {
        self.write(rel, text.as_bytes())
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<(), CliError> {
        manifest.files = self.files;
        let mut text =
            serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        write_atomic(&self.root.join(MANIFEST_NAME), text.as_bytes())
    }
}

/// Re-hashes every file listed in a manifest; returns the mismatches.
pub fn verify_manifest(root: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(root.join(MANIFEST_NAME))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    let mut bad = Vec::new();
    for f in &manifest.files {
        let bytes = fs::read(root.join(&f.path))?;
        if sha256_hex(&bytes) != f.sha256 || bytes.len() as u64 != f.bytes {
            bad.push(f.path.clone());
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        let leftovers: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }
}
