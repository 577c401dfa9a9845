use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

use uniconn::data::Manifest;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub kind: InputKind,
    pub sha256: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// A file, or a directory tree.
    Path,
    /// A manifest and the matrix files it lists.
    Dataset,
}

/// Everything needed to rerun a command byte-identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the binary name.
    pub argv: Vec<String>,
    pub config: Option<serde_json::Value>,
    pub config_sha256: Option<String>,
    pub seed: Option<u64>,
    /// Directory relative paths in `argv` resolve against.
    pub cwd: PathBuf,
    pub inputs: Vec<InputDigest>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if path.file_name().is_some_and(|n| n != "run.json") {
            out.push(path.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}

/// Digest of a file, or of every file under a directory (by relative path
/// and contents, in sorted order; provenance records are skipped).
pub fn digest_path(path: &Path) -> CliResult<String> {
    if !path.exists() {
        return Err(CliError::missing(path));
    }
    if path.is_file() {
        return Ok(sha256_bytes(
            &fs::read(path).map_err(|e| CliError::io(path, e))?,
        ));
    }
    let mut files = Vec::new();
    collect_files(path, path, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for rel in files {
        let full = path.join(&rel);
        h.update(rel.to_string_lossy().as_bytes());
        h.update([0]);
        h.update(fs::read(&full).map_err(|e| CliError::io(&full, e))?);
        h.update([0]);
    }
    Ok(hex(&h.finalize()))
}

/// Digest of a manifest plus every matrix file it lists.
pub fn digest_dataset(manifest: &Path) -> CliResult<String> {
    let bytes = fs::read(manifest).map_err(|e| CliError::io(manifest, e))?;
    let parsed: Manifest = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::config(format!("{}: {e}", manifest.display())))?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let mut h = Sha256::new();
    h.update(&bytes);
    for s in &parsed.subjects {
        for rel in [&s.sc_csv, &s.fts_csv, &s.fv_csv] {
            let path = dir.join(rel);
            h.update([0]);
            h.update(fs::read(&path).map_err(|e| CliError::io(&path, e))?);
        }
    }
    Ok(hex(&h.finalize()))
}

impl RunRecord {
    pub fn new(command: &str, argv: &[String]) -> Self {
        RunRecord {
            tool: "uniconn".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            argv: argv.to_vec(),
            config: None,
            config_sha256: None,
            seed: None,
            cwd: std::env::current_dir().unwrap_or_default(),
            inputs: Vec::new(),
        }
    }

    pub fn with_config<T: Serialize>(mut self, cfg: &T, seed: u64) -> Self {
        let value = serde_json::to_value(cfg).expect("config serializes");
        self.config_sha256 = Some(sha256_bytes(value.to_string().as_bytes()));
        self.config = Some(value);
        self.seed = Some(seed);
        self
    }

    pub fn input(mut self, path: &Path) -> CliResult<Self> {
        self.inputs.push(InputDigest {
            path: path.to_path_buf(),
            kind: InputKind::Path,
            sha256: digest_path(path)?,
        });
        Ok(self)
    }

    pub fn input_dataset(mut self, manifest: &Path) -> CliResult<Self> {
        self.inputs.push(InputDigest {
            path: manifest.to_path_buf(),
            kind: InputKind::Dataset,
            sha256: digest_dataset(manifest)?,
        });
        Ok(self)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("record serializes") + "\n";
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    /// Fails if any recorded input changed since the record was written.
    pub fn verify_inputs(&self) -> CliResult<()> {
        for input in &self.inputs {
            let now = match input.kind {
                InputKind::Path => digest_path(&input.path)?,
                InputKind::Dataset => digest_dataset(&input.path)?,
            };
            if now != input.sha256 {
                return Err(CliError::config(format!(
                    "input {} changed since the run was recorded",
                    input.path.display()
                )));
            }
        }
        Ok(())
    }
}
