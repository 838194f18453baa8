//! CSV tables with a commented provenance header, and the append-only run log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, HarnessResult};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const RUN_LOG: &str = "runs.jsonl";

/// Formats a float with 12 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

/// Writes `rows` under a `#` header naming the recipe and config hash.
pub fn write_csv(path: &Path, recipe: &str, config_hash: &str, columns: &[&str], rows: &[Vec<Cell>]) -> HarnessResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut file = File::create(path)?;
    writeln!(file, "# xpmif {TOOL_VERSION}")?;
    writeln!(file, "# recipe: {recipe}")?;
    writeln!(file, "# config_sha256: {config_hash}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(columns)?;
    for row in rows {
        if row.len() != columns.len() {
            return Err(HarnessError::Output(format!("row of {} cells for {} columns", row.len(), columns.len())));
        }
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool_version: String,
    pub recipe: String,
    pub config_hash: String,
    pub seed: u64,
    pub realizations: usize,
    /// Named scalar results, e.g. variance per IF mode.
    pub results: Vec<(String, f64)>,
    pub files: Vec<String>,
    pub wall_clock_s: f64,
}

impl RunRecord {
    /// Short identifier used to name runs; collisions on it are rejected.
    pub fn short_id(&self) -> &str {
        &self.config_hash[..16.min(self.config_hash.len())]
    }
}

/// Appends `record` to the run log in `dir`.
///
/// A record whose short id matches an existing entry with a different full
/// hash is refused.
pub fn append_record(dir: &Path, record: &RunRecord) -> HarnessResult<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(RUN_LOG);
    if path.exists() {
        for (i, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let old: RunRecord = serde_json::from_str(&line)
                .map_err(|e| HarnessError::Output(format!("{}:{}: {e}", path.display(), i + 1)))?;
            if old.short_id() == record.short_id() && old.config_hash != record.config_hash {
                return Err(HarnessError::Output(format!(
                    "config hash collision on {} with line {}",
                    record.short_id(),
                    i + 1
                )));
            }
        }
    }
    let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
    writeln!(f, "{}", serde_json::to_string(record).map_err(|e| HarnessError::Output(e.to_string()))?)?;
    Ok(path)
}
