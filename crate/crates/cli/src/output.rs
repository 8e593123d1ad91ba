use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config: serde_json::Value,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputEntry>,
}

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects a run's outputs in a staging directory and moves them into place
/// only when the run succeeds. Dropping an unfinished run removes the staging
/// directory.
pub struct RunOutput {
    dir: PathBuf,
    staging: PathBuf,
    entries: Vec<OutputEntry>,
    started: Instant,
    finished: bool,
}

impl RunOutput {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        let staging = dir.join(format!(".staging-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging)?;
        Ok(RunOutput { dir: dir.to_path_buf(), staging, entries: vec![], started: Instant::now(), finished: false })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.staging.join(name), bytes)?;
        self.entries.push(OutputEntry { file: name.to_string(), bytes: bytes.len(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    /// Publish the staged files and write the manifest last.
    pub fn finish(mut self, command: &str, config: &impl Serialize) -> Result<RunManifest, CliError> {
        for e in &self.entries {
            fs::rename(self.staging.join(&e.file), self.dir.join(&e.file))?;
        }
        let manifest = RunManifest {
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config)?,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            outputs: self.entries.clone(),
        };
        let tmp = self.staging.join(MANIFEST);
        let mut f = fs::File::create(&tmp)?;
        f.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        f.write_all(b"\n")?;
        f.sync_all()?;
        fs::rename(&tmp, self.dir.join(MANIFEST))?;
        fs::remove_dir_all(&self.staging)?;
        self.finished = true;
        Ok(manifest)
    }
}

impl Drop for RunOutput {
    fn drop(&mut self) {
        if !self.finished {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

/// Compare every listed output with its recorded checksum.
pub fn verify(dir: &Path, manifest: &RunManifest) -> Vec<(String, bool)> {
    manifest
        .outputs
        .iter()
        .map(|e| {
            let ok = fs::read(dir.join(&e.file)).map(|b| sha256_hex(&b) == e.sha256).unwrap_or(false);
            (e.file.clone(), ok)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn unfinished_run_leaves_nothing() {
        let tmp = tempfile::tempdir().unwrap();
        {
            let mut out = RunOutput::create(tmp.path()).unwrap();
            out.write("series.csv", b"t_us,value,stderr\n").unwrap();
        }
        assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
    }

    #[test]
    fn finished_run_is_verifiable() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = RunOutput::create(tmp.path()).unwrap();
        out.write("a.csv", b"x_nm\n1\n").unwrap();
        let m = out.finish("test", &serde_json::json!({"seed": 1})).unwrap();
        assert!(verify(tmp.path(), &m).iter().all(|(_, ok)| *ok));
        fs::write(tmp.path().join("a.csv"), b"x_nm\n2\n").unwrap();
        assert!(!verify(tmp.path(), &m)[0].1);
    }
}
