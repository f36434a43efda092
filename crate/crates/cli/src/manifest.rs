use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{HarnessError, Result};

/// Which random substreams a run consumed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubstreamAssignment {
    pub purpose: String,
    pub seed: u64,
    /// Stream indices `0..paths`.
    pub paths: usize,
    pub used_for: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub kind: String,
    pub software_version: String,
    pub config_hash: String,
    pub files: Vec<String>,
    pub wall_clock_seconds: f64,
    pub substreams: Vec<SubstreamAssignment>,
}

/// Output directory plus the record of everything written into it.
pub struct RunOutput {
    dir: PathBuf,
    kind: String,
    config_hash: String,
    files: Vec<String>,
    substreams: Vec<SubstreamAssignment>,
    started: Instant,
}

impl RunOutput {
    /// Creates `dir` and proves it is writable before any work starts.
    pub fn open(dir: &Path, kind: &str, config_hash: String) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let probe = dir.join(format!(".{kind}.probe"));
        fs::write(&probe, b"").map_err(|e| HarnessError::io(&probe, e))?;
        fs::remove_file(&probe).map_err(|e| HarnessError::io(&probe, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            kind: kind.to_string(),
            config_hash,
            files: Vec::new(),
            substreams: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn record_substream(&mut self, purpose: &str, seed: u64, paths: usize, used_for: impl Into<String>) {
        self.substreams.push(SubstreamAssignment {
            purpose: purpose.to_string(),
            seed,
            paths,
            used_for: used_for.into(),
        });
    }

    pub fn write_with(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| HarnessError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn write_str(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        self.write_with(name, |w| w.write_all(text.as_bytes()))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value).expect("serializable");
        self.write_str(name, &(text + "\n"))
    }

    /// Writes `manifest_<kind>.json`, listing itself among the files.
    pub fn finish(mut self) -> Result<RunManifest> {
        let name = format!("manifest_{}.json", self.kind);
        self.files.push(name.clone());
        let manifest = RunManifest {
            kind: self.kind.clone(),
            software_version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
            config_hash: self.config_hash.clone(),
            files: self.files.clone(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            substreams: self.substreams.clone(),
        };
        let path = self.dir.join(&name);
        let text = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
        fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
        Ok(manifest)
    }
}
