//! Append-only run manifest: one JSON object per line. The first line
//! snapshots the config and the digests of every input file (recorded before
//! any stage runs); stage events follow; a final `run_complete` event marks
//! the run as reusable, so re-running with the same inputs is a no-op.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use cicl_core::rng::fnv1a64;
use cicl_core::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ManifestEvent {
    RunStart {
        version: String,
        command: String,
        config_digest: String,
        inputs: Vec<(String, String)>,
        config: Value,
    },
    Stage {
        name: String,
        outputs: Vec<String>,
    },
    StageFailed {
        name: String,
        error: String,
    },
    RunComplete,
}

pub struct Manifest {
    path: PathBuf,
    file: File,
}

/// FNV-1a digest of a file's bytes, hex-encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    let mut file = File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    Ok(format!("{:016x}", fnv1a64(&bytes)))
}

pub fn config_digest<T: Serialize>(config: &T) -> Result<String> {
    let json = serde_json::to_string(config)
        .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    Ok(format!("{:016x}", fnv1a64(json.as_bytes())))
}

impl Manifest {
    /// Start a new manifest, recording input digests up front. Returns None
    /// when an existing manifest already holds a completed run with the same
    /// command and config digest (resume is a no-op).
    pub fn start<T: Serialize>(
        out_dir: &Path,
        command: &str,
        config: &T,
        inputs: &[PathBuf],
    ) -> Result<Option<Manifest>> {
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join(MANIFEST_FILE);
        let digest = config_digest(config)?;
        if path.exists() && completed_run_matches(&path, command, &digest)? {
            return Ok(None);
        }
        let mut input_digests = Vec::with_capacity(inputs.len());
        for input in inputs {
            input_digests.push((input.display().to_string(), file_digest(input)?));
        }
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(&path)?;
        let mut manifest = Manifest { path, file };
        manifest.append(&ManifestEvent::RunStart {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_digest: digest,
            inputs: input_digests,
            config: serde_json::to_value(config)
                .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?,
        })?;
        Ok(Some(manifest))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, event: &ManifestEvent) -> Result<()> {
        let line = serde_json::to_string(event)
            .map_err(|e| Error::Data(format!("cannot serialize manifest event: {e}")))?;
        writeln!(self.file, "{line}")?;
        self.file.flush()?;
        Ok(())
    }

    pub fn stage(&mut self, name: &str, outputs: &[PathBuf]) -> Result<()> {
        self.append(&ManifestEvent::Stage {
            name: name.to_string(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        })
    }

    pub fn fail(&mut self, name: &str, error: &Error) -> Result<()> {
        self.append(&ManifestEvent::StageFailed {
            name: name.to_string(),
            error: error.to_string(),
        })
    }

    pub fn complete(mut self) -> Result<()> {
        self.append(&ManifestEvent::RunComplete)
    }
}

fn completed_run_matches(path: &Path, command: &str, digest: &str) -> Result<bool> {
    let reader = BufReader::new(File::open(path)?);
    let mut start_matches = false;
    let mut complete = false;
    for line in reader.lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        match serde_json::from_str::<ManifestEvent>(&line) {
            Ok(ManifestEvent::RunStart {
                command: c,
                config_digest,
                ..
            }) => start_matches = c == command && config_digest == digest,
            Ok(ManifestEvent::RunComplete) => complete = true,
            _ => {}
        }
    }
    Ok(start_matches && complete)
}
