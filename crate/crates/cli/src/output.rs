//! CSV tables and run manifests.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to trace a CSV back to the run that produced it.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub code_version: String,
    /// Fully resolved configuration after flag/file/default precedence.
    pub config: Value,
    pub outputs: Vec<String>,
    pub summary: Value,
    pub wall_seconds: f64,
    /// The only field that differs between identical runs.
    pub timestamp_unix: u64,
}

/// Output directory plus file stem shared by a command's artifacts.
pub struct Sink {
    dir: PathBuf,
    stem: String,
    started: Instant,
    outputs: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path, stem: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            stem: stem.to_string(),
            started: Instant::now(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.stem))
    }

    pub fn csv(&mut self, suffix: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let path = self.path(suffix);
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Config(e.to_string()))?;
        self.outputs.push(file_name(&path));
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, suffix: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.path(suffix);
        write_json(&path, value)?;
        self.outputs.push(file_name(&path));
        Ok(path)
    }

    pub fn manifest<C: Serialize, S: Serialize>(self, command: &str, config: &C, summary: &S) -> Result<PathBuf, CliError> {
        let m = RunManifest {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?,
            outputs: self.outputs.clone(),
            summary: serde_json::to_value(summary).map_err(|e| CliError::Config(e.to_string()))?,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        let path = self.path(".manifest.json");
        write_json(&path, &m)?;
        Ok(path)
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn io(e: csv::Error) -> CliError {
    CliError::Config(format!("cannot write CSV: {e}"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// Shortest representation that round-trips; always uses `.` as separator.
pub fn num(x: f64) -> String {
    format!("{x}")
}
