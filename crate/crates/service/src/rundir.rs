//! Timestamped run directories with the effective config saved verbatim.

use std::path::{Path, PathBuf};

use hipt_core::artifacts::{verify_run_dir, write_manifest, ArtifactError, RunManifest, RUN_MANIFEST};

use crate::config::RunConfig;

pub const CONFIG_FILE: &str = "config.toml";

#[derive(Clone, Debug)]
pub struct RunDir {
    pub path: PathBuf,
    pub command: String,
}

impl RunDir {
    /// `{runs_dir}/{command}-{layout}-{YYYYmmdd-HHMMSS}`, with a numeric
    /// suffix if that name is taken.
    pub fn create(config: &RunConfig, command: &str) -> std::io::Result<Self> {
        let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
        let base = format!("{command}-{}-{stamp}", config.layout);
        let mut path = config.runs_dir.join(&base);
        let mut k = 1;
        while path.exists() {
            path = config.runs_dir.join(format!("{base}-{k}"));
            k += 1;
        }
        std::fs::create_dir_all(&path)?;
        std::fs::write(path.join(CONFIG_FILE), config.to_toml())?;
        Ok(Self { path, command: command.to_string() })
    }

    pub fn join(&self, rel: &str) -> PathBuf {
        self.path.join(rel)
    }

    /// Hash every output file into the run manifest.
    pub fn finish(&self) -> Result<RunManifest, ArtifactError> {
        write_manifest(&self.path, &self.command)
    }
}

/// Verify the run manifest covering `path` (a run directory or a directory
/// directly inside one). Paths outside any run directory pass unchecked.
pub fn verify_enclosing_run(path: &Path) -> Result<(), ArtifactError> {
    for dir in path.ancestors().take(3) {
        if dir.join(RUN_MANIFEST).exists() {
            verify_run_dir(dir)?;
            return Ok(());
        }
    }
    Ok(())
}
