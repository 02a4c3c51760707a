//! Output directory bookkeeping: staged writes, the manifest of artifact
//! hashes and the run log.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const RUN_LOG: &str = "run.log.jsonl";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub sha256: String,
    pub bytes: u64,
    pub command: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    /// Keyed by path relative to the output directory, `/`-separated.
    pub artifacts: BTreeMap<String, ArtifactEntry>,
    /// Settings of the last run of each command.
    pub runs: BTreeMap<String, serde_json::Value>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            manifest_version: MANIFEST_VERSION,
            artifacts: BTreeMap::new(),
            runs: BTreeMap::new(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn rel_path(out: &Path, rel: &str) -> PathBuf {
    rel.split('/').fold(out.to_path_buf(), |p, part| p.join(part))
}

impl Manifest {
    /// The manifest in `out`, or an empty one if there is none yet.
    pub fn load(out: &Path) -> Result<Self> {
        let path = out.join(MANIFEST);
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| CliError::Core {
                context: format!("reading {}", path.display()),
                source: e.into(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(CliError::io(path)(e)),
        }
    }

    /// Reads an artifact written by `command`, checking it against its
    /// recorded hash.
    pub fn require(&self, out: &Path, rel: &str, command: &'static str) -> Result<Vec<u8>> {
        let missing = |detail: String| CliError::Dependency { command, detail };
        let entry = self
            .artifacts
            .get(rel)
            .filter(|e| e.command == command)
            .ok_or_else(|| missing(format!("{rel} is not in the manifest")))?;
        let path = rel_path(out, rel);
        let bytes = fs::read(&path).map_err(|e| missing(format!("cannot read {rel}: {e}")))?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(missing(format!("{rel} changed since it was written")));
        }
        Ok(bytes)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let written = fs::File::create(&tmp).and_then(|mut f| {
        f.write_all(bytes)?;
        f.sync_all()
    });
    if let Err(e) = written.and_then(|_| fs::rename(&tmp, path)) {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path)(e));
    }
    Ok(())
}

/// Artifacts of one command, held in memory until every one of them has
/// been produced.
pub struct Outputs {
    command: &'static str,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, rel: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((rel.into(), bytes));
    }

    /// Renders an artifact with one of the library's `write_*` functions.
    pub fn render(
        &mut self,
        rel: impl Into<String>,
        context: &str,
        f: impl FnOnce(&mut Vec<u8>) -> gravnet::Result<()>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(CliError::core(context))?;
        self.add(rel, buf);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, rel: impl Into<String>, value: &T) -> Result<()> {
        let mut buf = serde_json::to_vec_pretty(value).map_err(|e| CliError::Core {
            context: "serializing output".into(),
            source: e.into(),
        })?;
        buf.push(b'\n');
        self.add(rel, buf);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// Writes every file, then records them in the manifest.
    pub fn commit(self, out: &Path, settings: serde_json::Value) -> Result<Vec<String>> {
        let mut manifest = Manifest::load(out)?;
        let mut written = Vec::with_capacity(self.files.len());
        for (rel, bytes) in &self.files {
            write_atomic(&rel_path(out, rel), bytes)?;
            manifest.artifacts.insert(
                rel.clone(),
                ArtifactEntry {
                    sha256: sha256_hex(bytes),
                    bytes: bytes.len() as u64,
                    command: self.command.to_string(),
                },
            );
            written.push(rel.clone());
        }
        manifest.runs.insert(self.command.to_string(), settings);
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        write_atomic(&out.join(MANIFEST), &bytes)?;
        Ok(written)
    }
}

#[derive(Serialize)]
struct LogLine<'a> {
    command: &'a str,
    stage: &'a str,
    message: String,
    elapsed_ms: u128,
}

/// One stderr line per stage, mirrored as JSON in `run.log.jsonl`.
pub struct Logger {
    path: PathBuf,
    command: &'static str,
    start: Instant,
    quiet: bool,
}

impl Logger {
    pub fn new(out: &Path, command: &'static str, quiet: bool) -> Self {
        Self {
            path: out.join(RUN_LOG),
            command,
            start: Instant::now(),
            quiet,
        }
    }

    pub fn stage(&self, stage: &str, message: impl Display) {
        let message = message.to_string();
        if !self.quiet {
            eprintln!("[{}] {stage}: {message}", self.command);
        }
        let line = LogLine {
            command: self.command,
            stage,
            message,
            elapsed_ms: self.start.elapsed().as_millis(),
        };
        let appended = self.path.parent().map_or(Ok(()), fs::create_dir_all).and_then(|_| {
            let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
            let mut text = serde_json::to_string(&line).expect("log line serializes");
            text.push('\n');
            f.write_all(text.as_bytes())
        });
        if let Err(e) = appended {
            eprintln!("warning: cannot append to {}: {e}", self.path.display());
        }
    }
}
