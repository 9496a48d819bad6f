//! Run manifests: every output directory gets exactly one `manifest.txt`
//! recording the command line, seed, inputs, wall-clock bounds and a
//! checksum for every file the command wrote there. Re-running the same
//! command reproduces every output byte for byte; only the two timestamp
//! lines may differ.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::CliResult;

pub const MANIFEST: &str = "manifest.txt";

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| format!("read {}: {e}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{:02x}", b)).collect())
}

/// An output directory that tracks every file registered into it and, on
/// `finish`, writes the manifest. Register paths through [`OutDir::file`]
/// (or [`OutDir::claim_dir`] for trees written by library code) so nothing
/// escapes the checksum list.
pub struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
    command: String,
    seed: Option<u64>,
    config_hash: Option<String>,
    inputs: Vec<String>,
    started: u64,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<OutDir> {
        fs::create_dir_all(root).map_err(|e| format!("create {}: {e}", root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
            command: std::env::args().collect::<Vec<_>>().join(" "),
            seed: None,
            config_hash: None,
            inputs: Vec::new(),
            started: unix_now(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn set_config_hash(&mut self, hash: String) {
        self.config_hash = Some(hash);
    }

    pub fn add_input(&mut self, path: impl AsRef<Path>) {
        self.inputs.push(path.as_ref().display().to_string());
    }

    /// Registers `rel` as an output, creates its parent directories and
    /// returns the absolute path to write to.
    pub fn file(&mut self, rel: impl AsRef<Path>) -> CliResult<PathBuf> {
        let rel = rel.as_ref();
        if rel.is_absolute() {
            return Err(format!("output path {} must be relative", rel.display()).into());
        }
        let abs = self.root.join(rel);
        if let Some(parent) = abs.parent() {
            fs::create_dir_all(parent).map_err(|e| format!("create {}: {e}", parent.display()))?;
        }
        self.written.push(rel.to_path_buf());
        Ok(abs)
    }

    /// Registers every file already present under `root/rel`, for subtrees
    /// written by library code such as checkpoints.
    pub fn claim_dir(&mut self, rel: impl AsRef<Path>) -> CliResult<()> {
        let rel = rel.as_ref().to_path_buf();
        let abs = self.root.join(&rel);
        let mut entries: Vec<_> = fs::read_dir(&abs)
            .map_err(|e| format!("read {}: {e}", abs.display()))?
            .collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let sub = rel.join(entry.file_name());
            if entry.file_type()?.is_dir() {
                self.claim_dir(&sub)?;
            } else {
                self.written.push(sub);
            }
        }
        Ok(())
    }

    /// Checksums every registered file and writes the manifest. Call last.
    pub fn finish(mut self) -> CliResult<()> {
        self.written.sort();
        self.written.dedup();
        let mut text = String::new();
        text.push_str(&format!("command {}\n", self.command));
        if let Some(seed) = self.seed {
            text.push_str(&format!("seed {}\n", seed));
        }
        if let Some(hash) = &self.config_hash {
            text.push_str(&format!("config_hash {}\n", hash));
        }
        for input in &self.inputs {
            text.push_str(&format!("input {}\n", input));
        }
        text.push_str(&format!("started_unix {}\n", self.started));
        text.push_str(&format!("finished_unix {}\n", unix_now()));
        for rel in &self.written {
            let digest = sha256_file(&self.root.join(rel))?;
            text.push_str(&format!("output {} {}\n", digest, rel.display()));
        }
        let path = self.root.join(MANIFEST);
        fs::write(&path, text).map_err(|e| format!("write {}: {e}", path.display()))?;
        Ok(())
    }
}
