//! Run manifests and atomic file output.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use randhill::sampling::GENERATOR_ID;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub git_describe: String,
    /// Full argument vector of the invocation.
    pub command: Vec<String>,
    /// Resolved configuration, including every default that was filled in.
    pub config: Value,
    pub master_seed: Option<u64>,
    pub generator: Option<String>,
    pub threads: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<String>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(config: Value, master_seed: Option<u64>, threads: usize, started_unix: u64) -> Self {
        Self {
            tool: "randhill".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            git_describe: env!("RANDHILL_GIT_DESCRIBE").into(),
            command: std::env::args().collect(),
            config,
            master_seed,
            generator: master_seed.map(|_| GENERATOR_ID.to_string()),
            threads,
            started_unix,
            finished_unix: started_unix,
            outputs: Vec::new(),
        }
    }
}

/// Sibling manifest path: `out.csv` -> `out.csv.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Write through a temporary file in the target directory and rename it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot move output into {}", path.display()))?;
    Ok(())
}

/// Write every output and one sibling manifest per output.
pub fn write_outputs(mut manifest: RunManifest, files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    manifest.outputs = files.iter().map(|(p, _)| p.display().to_string()).collect();
    for (p, bytes) in files {
        write_atomic(p, bytes)?;
    }
    manifest.finished_unix = unix_now();
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    for (p, _) in files {
        write_atomic(&manifest_path(p), text.as_bytes())?;
    }
    Ok(())
}
