//! Loaded project: effective config, resolved paths and artifact plumbing.
//!
//! Every artifact `X` gets a sibling `X.manifest`:
//!
//! ```text
//! gazefuse-manifest 1
//! command <subcommand>
//! config <sha256 of the effective config TOML>
//! input <sha256> <path relative to the config directory>
//! ```
//!
//! Input lines are sorted by path. Rerunning a stage with the same inputs
//! reproduces the artifact and its manifest byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::config::{Paths, ProjectConfig};
use crate::error::{Error, Result};
use crate::Task;

pub const MANIFEST_MAGIC: &str = "gazefuse-manifest";
pub const MANIFEST_VERSION: u32 = 1;

pub struct Project {
    pub cfg: ProjectConfig,
    pub base: PathBuf,
    pub paths: Paths,
    pub workers: usize,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(Error::io(format!("hashing {}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(Error::io(format!("creating {}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(Error::io(format!("writing {}", path.display())))
}

/// `path` with `.manifest` appended to the full file name.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest");
    artifact.with_file_name(name)
}

impl Project {
    pub fn new(cfg: ProjectConfig, base: PathBuf, workers: Option<usize>) -> Result<Self> {
        cfg.validate()?;
        let paths = cfg.resolve(&base);
        let workers = workers.unwrap_or(cfg.workers).max(1);
        Ok(Self { cfg, base, paths, workers })
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.paths.outputs.join(name)
    }

    pub fn tasks(&self, only: Option<Task>) -> Vec<Task> {
        match only {
            Some(t) => vec![t],
            None => self.cfg.tasks.clone(),
        }
    }

    /// Upstream artifact check.
    pub fn require(&self, path: &Path, producer: &'static str) -> Result<()> {
        if path.exists() {
            Ok(())
        } else {
            Err(Error::MissingArtifact {
                path: path.to_path_buf(),
                producer,
            })
        }
    }

    /// External input named by a config field.
    pub fn require_input(&self, path: &Path, field: &str) -> Result<()> {
        if path.exists() {
            Ok(())
        } else {
            Err(Error::config(field, format!("{} does not exist", path.display())))
        }
    }

    fn relative(&self, path: &Path) -> String {
        let rel = path.strip_prefix(&self.base).unwrap_or(path);
        rel.components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/")
    }

    pub fn manifest_text(&self, command: &str, inputs: &[PathBuf]) -> Result<String> {
        let mut sorted = BTreeMap::new();
        for p in inputs {
            sorted.insert(self.relative(p), sha256_file(p)?);
        }
        let config_hash = hex::encode(Sha256::digest(self.cfg.to_toml()?.as_bytes()));
        let mut s = format!("{MANIFEST_MAGIC} {MANIFEST_VERSION}\ncommand {command}\nconfig {config_hash}\n");
        for (path, hash) in sorted {
            s.push_str(&format!("input {hash} {path}\n"));
        }
        Ok(s)
    }

    /// Writes the manifest of an artifact that is already on disk.
    pub fn write_manifest(&self, command: &str, artifact: &Path, inputs: &[PathBuf]) -> Result<()> {
        write_file(&manifest_path(artifact), self.manifest_text(command, inputs)?.as_bytes())
    }

    /// Writes `bytes` to `artifact`, then its manifest.
    pub fn emit(&self, command: &str, artifact: &Path, bytes: &[u8], inputs: &[PathBuf]) -> Result<()> {
        write_file(artifact, bytes)?;
        self.write_manifest(command, artifact, inputs)?;
        log::info!("wrote {}", artifact.display());
        Ok(())
    }

    pub fn annotation_file(&self, session: &str) -> PathBuf {
        self.paths.annotations.join(format!("{session}.csv"))
    }
}

/// Maps `f` over `items` on up to `workers` threads, keeping input order.
pub fn par_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                scope.spawn(move || part.iter().map(f).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker thread panicked")).collect()
    })
}

/// Collapses per-session results; any failure turns into a
/// [`Error::PartialFailure`] listing the affected sessions.
pub fn collect_sessions<R>(sessions: &[String], results: Vec<Result<R>>) -> Result<Vec<R>> {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (s, r) in sessions.iter().zip(results) {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                log::error!("session {s}: {e}");
                failed.push(s.clone());
            }
        }
    }
    if failed.is_empty() {
        Ok(ok)
    } else {
        Err(Error::PartialFailure {
            total: sessions.len(),
            failed: failed.len(),
            sessions: failed,
        })
    }
}
