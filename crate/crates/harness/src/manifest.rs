use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    /// Paths relative to the output directory.
    pub outputs: Vec<PathBuf>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub dphase: String,
    pub dphase_cli: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub stages: Vec<StageRecord>,
    pub versions: Versions,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            config_hash,
            seed,
            threads: rayon::current_num_threads(),
            stages: Vec::new(),
            versions: Versions {
                dphase: dphase::VERSION.to_string(),
                dphase_cli: env!("CARGO_PKG_VERSION").to_string(),
            },
        }
    }

    /// Checks that every referenced output exists and, for JSON and CSV
    /// files, parses.
    pub fn verify(&self, out: &Path) -> CliResult<()> {
        for path in self.stages.iter().flat_map(|s| &s.outputs) {
            let full = out.join(path);
            let bytes = std::fs::read(&full).map_err(|e| CliError::io(&full, e))?;
            match full.extension().and_then(|e| e.to_str()) {
                Some("json") => {
                    serde_json::from_slice::<serde_json::Value>(&bytes)
                        .map_err(|source| CliError::Parse { path: full.clone(), source })?;
                }
                Some("csv") => {
                    let text = String::from_utf8_lossy(&bytes);
                    let mut lines = text.lines();
                    let columns = lines.next().map_or(0, |h| h.split(',').count());
                    if columns == 0 || lines.any(|l| l.split(',').count() != columns) {
                        return Err(CliError::io(
                            &full,
                            std::io::Error::new(std::io::ErrorKind::InvalidData, "ragged or empty CSV"),
                        ));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn write(&self, out: &Path) -> CliResult<PathBuf> {
        self.verify(out)?;
        let path = out.join(MANIFEST_FILE);
        write_json(&path, self)?;
        Ok(path)
    }
}

/// Collects the outputs and timing of one stage.
pub(crate) struct StageWriter<'a> {
    root: &'a Path,
    dir: PathBuf,
    record: StageRecord,
    started: Instant,
}

impl<'a> StageWriter<'a> {
    pub fn begin(root: &'a Path, stage: &str) -> CliResult<Self> {
        let dir = root.join(stage);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(StageWriter {
            root,
            dir,
            record: StageRecord { stage: stage.to_string(), outputs: Vec::new(), wall_time_s: 0.0 },
            started: Instant::now(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Records a file already written under the stage directory.
    pub fn record(&mut self, path: &Path) {
        let rel = path.strip_prefix(self.root).unwrap_or(path).to_path_buf();
        self.record.outputs.push(rel);
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let path = self.path(name);
        write_json(&path, value)?;
        self.record(&path);
        Ok(path)
    }

    pub fn text(&mut self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.path(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.record(&path);
        Ok(path)
    }

    pub fn finish(mut self) -> StageRecord {
        self.record.wall_time_s = self.started.elapsed().as_secs_f64();
        self.record
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
