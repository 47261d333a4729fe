//! Run directories: every output file listed with its SHA-256 in a manifest
//! that is checked before anything is loaded back.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{file}: checksum mismatch")]
    ChecksumMismatch { file: String },
    #[error("{file}: listed in the manifest but missing")]
    Missing { file: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Relative path (forward slashes) to hex SHA-256.
    pub files: BTreeMap<String, String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io { path: path.to_path_buf(), source }
}

pub fn file_sha256(path: &Path) -> Result<String, ArtifactError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<(), ArtifactError> {
    let mut entries: Vec<_> =
        std::fs::read_dir(dir).map_err(io_err(dir))?.collect::<Result<_, _>>().map_err(io_err(dir))?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            collect(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("inside root");
            let rel: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            let rel = rel.join("/");
            if rel != RUN_MANIFEST {
                out.push(rel);
            }
        }
    }
    Ok(())
}

/// Hash every file under `dir` and write the manifest beside them.
pub fn write_manifest(dir: &Path, command: &str) -> Result<RunManifest, ArtifactError> {
    let mut files = Vec::new();
    collect(dir, dir, &mut files)?;
    let mut manifest = RunManifest { command: command.to_string(), files: BTreeMap::new() };
    for f in files {
        manifest.files.insert(f.clone(), file_sha256(&dir.join(&f))?);
    }
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| ArtifactError::Manifest(e.to_string()))?;
    let path = dir.join(RUN_MANIFEST);
    std::fs::write(&path, json).map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, ArtifactError> {
    let path = dir.join(RUN_MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| ArtifactError::Manifest(e.to_string()))
}

/// Re-hash every listed file. Files added after the manifest was written are
/// ignored.
pub fn verify_run_dir(dir: &Path) -> Result<RunManifest, ArtifactError> {
    let manifest = read_manifest(dir)?;
    for (file, expected) in &manifest.files {
        let path = dir.join(file);
        if !path.exists() {
            return Err(ArtifactError::Missing { file: file.clone() });
        }
        if file_sha256(&path)? != *expected {
            return Err(ArtifactError::ChecksumMismatch { file: file.clone() });
        }
    }
    Ok(manifest)
}

/// Verify one file against the manifest of `dir`.
pub fn verify_file(dir: &Path, file: &str) -> Result<(), ArtifactError> {
    let manifest = read_manifest(dir)?;
    let expected = manifest.files.get(file).ok_or_else(|| ArtifactError::Missing { file: file.to_string() })?;
    if file_sha256(&dir.join(file))? != *expected {
        return Err(ArtifactError::ChecksumMismatch { file: file.to_string() });
    }
    Ok(())
}
