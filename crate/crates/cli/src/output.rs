//! Artifact writers: CSV tables with a `#` timestamp line and a `#` JSON
//! config line, and JSON-lines step logs.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::RunError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    U(u64),
    F(f64),
    S(String),
    B(bool),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::U(v) => write!(f, "{v}"),
            Cell::F(v) if v.is_nan() => f.write_str("nan"),
            Cell::F(v) => write!(f, "{v}"),
            Cell::S(v) => f.write_str(v),
            Cell::B(v) => write!(f, "{v}"),
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

/// Ordered (column, value) pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Row(pub Vec<(&'static str, Cell)>);

impl Row {
    pub fn with(mut self, key: &'static str, v: impl Into<Cell>) -> Self {
        self.0.push((key, v.into()));
        self
    }

    pub fn extend(mut self, other: &Row) -> Self {
        self.0.extend(other.0.iter().cloned());
        self
    }

    pub fn get(&self, key: &str) -> Option<&Cell> {
        self.0.iter().find(|(k, _)| *k == key).map(|(_, v)| v)
    }

    pub fn f64(&self, key: &str) -> f64 {
        match self.get(key) {
            Some(Cell::F(v)) => *v,
            Some(Cell::U(v)) => *v as f64,
            _ => f64::NAN,
        }
    }

    pub fn text(&self, key: &str) -> String {
        self.get(key).map(|c| c.to_string()).unwrap_or_default()
    }
}

pub fn timestamp_line() -> String {
    let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("# generated_at_unix={secs}\n")
}

/// CSV table. Everything after the timestamp line is hashed.
pub struct TableWriter {
    path: PathBuf,
    out: BufWriter<File>,
    hasher: Sha256,
    columns: Option<Vec<&'static str>>,
    rows: usize,
}

impl TableWriter {
    pub fn create(path: &Path, config_json: &str) -> Result<Self, RunError> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(timestamp_line().as_bytes())?;
        let mut w = TableWriter { path: path.to_path_buf(), out, hasher: Sha256::new(), columns: None, rows: 0 };
        w.emit(format!("# config {config_json}\n").as_bytes())?;
        Ok(w)
    }

    fn emit(&mut self, bytes: &[u8]) -> Result<(), RunError> {
        self.hasher.update(bytes);
        self.out.write_all(bytes)?;
        Ok(())
    }

    fn record<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<(), RunError> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(fields)?;
        let bytes = w.into_inner().map_err(|e| RunError::Io(e.into_error()))?;
        self.emit(&bytes)
    }

    pub fn write(&mut self, row: &Row) -> Result<(), RunError> {
        let cols: Vec<&'static str> = row.0.iter().map(|(k, _)| *k).collect();
        match &self.columns {
            None => {
                self.record(cols.iter().map(|c| c.to_string()))?;
                self.columns = Some(cols);
            }
            Some(c) if *c != cols => {
                return Err(RunError::Io(std::io::Error::other(format!(
                    "row columns {cols:?} differ from header in {}",
                    self.path.display()
                ))))
            }
            Some(_) => {}
        }
        self.record(row.0.iter().map(|(_, v)| v.to_string()))?;
        self.rows += 1;
        Ok(())
    }

    /// Flushes and returns (path, SHA-256 of the content below the
    /// timestamp line).
    pub fn finish(mut self) -> Result<(PathBuf, String), RunError> {
        self.out.flush()?;
        Ok((self.path, hex::encode(self.hasher.finalize())))
    }
}

pub struct LogWriter {
    out: BufWriter<File>,
}

impl LogWriter {
    pub fn create(path: &Path) -> Result<Self, RunError> {
        Ok(LogWriter { out: BufWriter::new(File::create(path)?) })
    }

    pub fn write_lines(&mut self, lines: &[String]) -> Result<(), RunError> {
        for l in lines {
            self.out.write_all(l.as_bytes())?;
            self.out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), RunError> {
        self.out.flush()?;
        Ok(())
    }
}
