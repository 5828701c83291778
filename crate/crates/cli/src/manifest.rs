//! Run manifests and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunPoint;
use crate::error::{CliError, CliResult};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(format!("temporary file in {}", dir.display()), e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    tmp.persist(path).map_err(|e| CliError::io(format!("renaming into {}", path.display()), e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    write_atomic(path, &bytes)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    #[serde(default)]
    pub records: Vec<String>,
    #[serde(default)]
    pub caches: Vec<String>,
    #[serde(default)]
    pub reports: Vec<String>,
    #[serde(default)]
    pub tables: Vec<String>,
    #[serde(default)]
    pub plots: Vec<String>,
    #[serde(default)]
    pub trajectories: Vec<String>,
}

impl Artifacts {
    pub fn all(&self) -> impl Iterator<Item = &String> {
        self.records.iter().chain(&self.caches).chain(&self.reports).chain(&self.tables).chain(&self.plots).chain(&self.trajectories)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Computed,
    Cached,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub run_hash: String,
    pub point: RunPoint,
    pub status: RunStatus,
    pub termination: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    /// Paths relative to the directory that holds `manifests/`, absolute when outside it.
    pub artifacts: Artifacts,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<RunEntry>,
}

/// Collects artifacts for one command invocation rooted at an output directory.
pub struct ManifestBuilder {
    root: PathBuf,
    manifest: RunManifest,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

impl ManifestBuilder {
    pub fn new(root: &Path, command: &str, config_hash: &str) -> Self {
        Self {
            root: root.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                config_hash: config_hash.to_string(),
                tool_version: TOOL_VERSION.to_string(),
                started_at: now(),
                finished_at: String::new(),
                artifacts: Artifacts::default(),
                runs: vec![],
            },
        }
    }

    pub fn path(root: &Path, command: &str, config_hash: &str) -> PathBuf {
        root.join("manifests").join(format!("{command}-{}.json", &config_hash[..16]))
    }

    pub fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.root).unwrap_or(path).to_string_lossy().replace('\\', "/")
    }

    pub fn artifacts(&mut self) -> &mut Artifacts {
        &mut self.manifest.artifacts
    }

    pub fn record(&mut self, path: &Path) {
        let p = self.relative(path);
        self.manifest.artifacts.records.push(p);
    }

    pub fn cache(&mut self, path: &Path) {
        let p = self.relative(path);
        self.manifest.artifacts.caches.push(p);
    }

    pub fn report(&mut self, path: &Path) {
        let p = self.relative(path);
        self.manifest.artifacts.reports.push(p);
    }

    pub fn table(&mut self, path: &Path) {
        let p = self.relative(path);
        self.manifest.artifacts.tables.push(p);
    }

    pub fn plot(&mut self, path: &Path) {
        let p = self.relative(path);
        self.manifest.artifacts.plots.push(p);
    }

    pub fn trajectory(&mut self, path: &Path) {
        let p = self.relative(path);
        self.manifest.artifacts.trajectories.push(p);
    }

    pub fn run(&mut self, entry: RunEntry) {
        self.manifest.runs.push(entry);
    }

    /// Writes `manifests/<command>-<hash>.json`. Cache entries listed by an earlier manifest of the
    /// same name are kept while their files exist, since a rerun finds them already built.
    pub fn finish(mut self) -> CliResult<(PathBuf, RunManifest)> {
        let path = Self::path(&self.root, &self.manifest.command, &self.manifest.config_hash);
        if let Ok(bytes) = std::fs::read(&path) {
            if let Ok(old) = serde_json::from_slice::<RunManifest>(&bytes) {
                for c in old.artifacts.caches {
                    let on_disk = if Path::new(&c).is_absolute() { PathBuf::from(&c) } else { self.root.join(&c) };
                    if on_disk.exists() && !self.manifest.artifacts.caches.contains(&c) {
                        self.manifest.artifacts.caches.push(c);
                    }
                }
            }
        }
        for list in [
            &mut self.manifest.artifacts.records,
            &mut self.manifest.artifacts.caches,
            &mut self.manifest.artifacts.reports,
            &mut self.manifest.artifacts.tables,
            &mut self.manifest.artifacts.plots,
            &mut self.manifest.artifacts.trajectories,
        ] {
            list.sort();
            list.dedup();
        }
        self.manifest.finished_at = now();
        write_json(&path, &self.manifest)?;
        Ok((path, self.manifest))
    }
}

pub fn load_manifest(path: &Path) -> CliResult<RunManifest> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Internal(format!("manifest {}: {e}", path.display())))
}
