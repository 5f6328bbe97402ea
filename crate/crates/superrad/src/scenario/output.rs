//! CSV and manifest writers.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// First line of every CSV file.
pub fn manifest_line(hash: &str) -> String {
    format!("# manifest: {hash}")
}

/// Quote a field when it would break the row.
pub fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

/// Line-oriented CSV writer with the manifest comment and header.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: impl AsRef<Path>, hash: &str, header: &[String]) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = CsvWriter {
            path,
            out: BufWriter::new(file),
        };
        w.line(&manifest_line(hash))?;
        w.row(header)?;
        Ok(w)
    }

    /// Reopen for appending; the caller has checked the header.
    pub fn append(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = fs::OpenOptions::new().append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(CsvWriter {
            path,
            out: BufWriter::new(file),
        })
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn row(&mut self, cells: &[String]) -> Result<()> {
        let joined: Vec<String> = cells.iter().map(|c| field(c)).collect();
        self.line(&joined.join(","))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Parsed comment hash, header and data rows (as raw lines) of a CSV file.
pub struct ExistingCsv {
    pub hash: Option<String>,
    pub header: Vec<String>,
    pub rows: Vec<String>,
}

pub fn read_existing(path: impl AsRef<Path>) -> Result<Option<ExistingCsv>> {
    let path = path.as_ref();
    if !path.exists() {
        return Ok(None);
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hash = None;
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(h) = line.strip_prefix("# manifest: ") {
            hash = Some(h.trim().to_string());
        } else if line.trim().is_empty() {
            continue;
        } else if header.is_empty() {
            header = line.split(',').map(str::to_string).collect();
        } else {
            rows.push(line);
        }
    }
    Ok(Some(ExistingCsv { hash, header, rows }))
}

pub fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Run record written next to the data files.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub config_hash: String,
    pub code_version: String,
    pub command: String,
    pub conventions: Conventions,
    pub wall_clock_seconds: f64,
    pub files: Vec<String>,
    pub cells: Vec<CellRecord>,
    pub config: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Conventions {
    pub time_unit: &'static str,
    pub level_order: &'static str,
    pub drive_phase: &'static str,
    pub circular: &'static str,
    pub emission: &'static str,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            time_unit: "N Gamma t",
            level_order: "ground levels by ascending m, then excited levels by ascending m",
            drive_phase: "pulse exp(-i theta (e^{i phase} D+ + e^{-i phase} D-)/2)",
            circular: "eps_R = -(eps_V + i eps_H)/sqrt2, eps_L = (eps_V - i eps_H)/sqrt2",
            emission: "<D+ D-> per channel, not normalized by N",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CellRecord {
    pub index: usize,
    pub tag: String,
    pub status: String,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}
