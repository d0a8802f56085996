//! Run directories, manifests and the shared run index.
//!
//! Every run owns `<root>/<run_id>/`. Artifacts are written through
//! [`RunDir`], which records them; `manifest.json` is written last and lists
//! every other file in the directory. Finished runs are also appended as one
//! JSON line to `<root>/index.jsonl` while holding an exclusive lock on it.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const INDEX_FILE: &str = "index.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub config_hash: String,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
    pub status: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<FileEntry>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn succeeded(&self) -> bool {
        self.status == Termination::Completed
    }
}

/// An open run directory collecting artifacts.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    path: PathBuf,
    id: String,
    command: String,
    hash: String,
    started: DateTime<Utc>,
    files: Vec<String>,
    warnings: Vec<String>,
}

impl RunDir {
    /// Creates a fresh directory named `<label>-<hash12>-<timestamp>[-k]`.
    pub fn create(root: &Path, label: &str, command: &str, hash: &str) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        let started = Utc::now();
        let base = format!(
            "{}-{}-{}",
            sanitize(label),
            &hash[..hash.len().min(12)],
            started.format("%Y%m%dT%H%M%S%.3fZ")
        );
        let mut k = 0usize;
        loop {
            let id = if k == 0 {
                base.clone()
            } else {
                format!("{base}-{k}")
            };
            let path = root.join(&id);
            // create_dir fails if another worker took the name first
            match fs::create_dir(&path) {
                Ok(()) => {
                    return Ok(Self {
                        root: root.to_path_buf(),
                        path,
                        id,
                        command: command.into(),
                        hash: hash.into(),
                        started,
                        files: Vec::new(),
                        warnings: Vec::new(),
                    })
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => k += 1,
                Err(e) => return Err(CliError::io(&path, e)),
            }
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn write<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.path.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&path, e))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.into());
        }
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, |w| w.write_all(text.as_bytes()))
    }

    /// Writes `manifest.json`, then appends it to the shared index.
    pub fn finish(self, error: Option<String>) -> Result<RunManifest, CliError> {
        let mut files = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let path = self.path.join(name);
            let meta = fs::metadata(&path).map_err(|e| CliError::io(&path, e))?;
            files.push(FileEntry {
                name: name.clone(),
                bytes: meta.len(),
            });
        }
        let manifest = RunManifest {
            run_id: self.id.clone(),
            command: self.command.clone(),
            config_hash: self.hash.clone(),
            started: self.started,
            finished: Utc::now(),
            status: if error.is_none() {
                Termination::Completed
            } else {
                Termination::NumericalFailure
            },
            error,
            files,
            warnings: self.warnings.clone(),
        };
        let path = self.path.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        append_index(&self.root, &manifest)?;
        Ok(manifest)
    }
}

/// Appends one line to `<root>/index.jsonl` under an exclusive lock.
pub fn append_index(root: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let path = root.join(INDEX_FILE);
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| CliError::io(&path, e))?;
    file.lock().map_err(|e| CliError::io(&path, e))?;
    let mut line = serde_json::to_string(manifest).expect("manifest serializes");
    line.push('\n');
    let res = file.write_all(line.as_bytes()).and_then(|_| file.flush());
    let unlock = file.unlock();
    res.and(unlock).map_err(|e| CliError::io(&path, e))
}

pub fn read_index(root: &Path) -> Result<Vec<RunManifest>, CliError> {
    let path = root.join(INDEX_FILE);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CliError::Config(e.to_string())))
        .collect()
}

fn sanitize(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "run".into()
    } else {
        s
    }
}
