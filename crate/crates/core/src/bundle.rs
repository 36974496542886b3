//! Dataset bundles on disk and the run manifests that describe them.
//!
//! A bundle is a directory holding `trajectories.csv`, `meta.csv` and,
//! when produced by ingestion, `diagnostics.csv`. Every command also writes
//! a `manifest.json` listing its inputs and outputs with SHA-256 digests.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingest::{self, ParseDiagnostic, ParseOptions};
use crate::model::Dataset;

pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const META_FILE: &str = "meta.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Reproducibility record of one command invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<FileDigest>,
    pub parameters: BTreeMap<String, String>,
    /// Relative to the output directory.
    pub outputs: Vec<FileDigest>,
    pub timestamp: String,
}

/// Honours `SOURCE_DATE_EPOCH` so repeated runs can produce identical manifests.
pub fn run_timestamp() -> String {
    let pinned = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0));
    pinned
        .unwrap_or_else(Utc::now)
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Collects everything a command reads and writes, then emits the manifest.
#[derive(Debug)]
pub struct RunRecorder {
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl RunRecorder {
    pub fn new(command: &str, out_dir: &Path) -> Self {
        RunRecorder {
            out_dir: out_dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_owned(),
                inputs: Vec::new(),
                parameters: BTreeMap::new(),
                outputs: Vec::new(),
                timestamp: run_timestamp(),
            },
        }
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.manifest.parameters.insert(key.to_owned(), value.to_string());
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.manifest.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    /// Writes `bytes` to `out_dir/name` atomically and records it.
    pub fn write_output(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        write_atomic(&path, bytes)?;
        self.manifest.outputs.retain(|o| o.path != name);
        self.manifest.outputs.push(FileDigest {
            path: name.to_owned(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn finish(self) -> Result<RunManifest> {
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        write_atomic(&self.out_dir.join(MANIFEST_FILE), text.as_bytes())?;
        Ok(self.manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Checks every recorded digest against the files as they are now.
/// Returns one message per mismatch or missing file.
pub fn verify_manifest(dir: &Path, manifest: &RunManifest) -> Vec<String> {
    let mut problems = Vec::new();
    let inputs = manifest.inputs.iter().map(|f| (PathBuf::from(&f.path), f));
    let outputs = manifest.outputs.iter().map(|f| (dir.join(&f.path), f));
    for (path, f) in inputs.chain(outputs) {
        match digest_file(&path) {
            Ok(h) if h == f.sha256 => {}
            Ok(h) => problems.push(format!("{}: expected {}, found {}", path.display(), f.sha256, h)),
            Err(e) => problems.push(format!("{}: {e}", path.display())),
        }
    }
    problems
}

pub fn trajectory_csv_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    ingest::write_trajectory_csv(&mut buf, ds.trajectories.values())?;
    Ok(buf)
}

pub fn meta_csv_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    ingest::write_metadata_csv(&mut buf, ds.meta.values())?;
    Ok(buf)
}

/// Writes the dataset CSVs (and diagnostics, if given) through `rec`.
pub fn write_bundle(rec: &mut RunRecorder, ds: &Dataset, diagnostics: Option<&[ParseDiagnostic]>) -> Result<()> {
    rec.write_output(TRAJECTORIES_FILE, &trajectory_csv_bytes(ds)?)?;
    rec.write_output(META_FILE, &meta_csv_bytes(ds)?)?;
    if let Some(diags) = diagnostics {
        let mut buf = Vec::new();
        ingest::write_diagnostics_csv(&mut buf, diags)?;
        rec.write_output(DIAGNOSTICS_FILE, &buf)?;
    }
    Ok(())
}

/// Loads a bundle directory, recording its files as inputs when `rec` is given.
pub fn load_bundle(dir: &Path, opts: &ParseOptions, rec: Option<&mut RunRecorder>) -> Result<Dataset> {
    let traj_path = dir.join(TRAJECTORIES_FILE);
    let meta_path = dir.join(META_FILE);
    if !traj_path.is_file() {
        bail!("{} is not a dataset bundle (missing {TRAJECTORIES_FILE})", dir.display());
    }
    let (traj_bytes, meta_bytes) = match rec {
        Some(rec) => (
            rec.read_input(&traj_path)?,
            if meta_path.is_file() { Some(rec.read_input(&meta_path)?) } else { None },
        ),
        None => (
            fs::read(&traj_path)?,
            if meta_path.is_file() { Some(fs::read(&meta_path)?) } else { None },
        ),
    };
    let trajectories = ingest::parse_trajectory_csv(BufReader::new(traj_bytes.as_slice()), TRAJECTORIES_FILE, opts)
        .with_context(|| format!("parsing {}", traj_path.display()))?
        .value;
    let meta = match meta_bytes {
        Some(bytes) => {
            ingest::parse_metadata_csv(bytes.as_slice(), META_FILE, opts)
                .with_context(|| format!("parsing {}", meta_path.display()))?
                .value
        }
        None => BTreeMap::new(),
    };
    Ok(ingest::assemble_dataset(opts.r_cap, opts.epoch, trajectories, meta)?)
}
