//! Result bundles: CSV tables, JSON objects and SVG plots in one directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;
use crate::manifest::{RunManifest, Stamp};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Float)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(i64::from(x))
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
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

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    ryu::Buffer::new().format(x).to_string()
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// `# manifest: <digest>`, then the header, then the rows.
    pub fn to_csv(&self, digest: &str) -> Vec<u8> {
        let mut out = format!("# manifest: {digest}\n").into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.columns).expect("write to memory");
            for row in &self.rows {
                w.write_record(row.iter().map(Cell::render)).expect("write to memory");
            }
            w.flush().expect("flush to memory");
        }
        out
    }
}

/// Output directory of one command invocation.
pub struct Bundle {
    dir: PathBuf,
    manifest: RunManifest,
    written: Vec<PathBuf>,
}

impl Bundle {
    pub fn create(dir: &Path, manifest: RunManifest) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
        let mut bundle = Self {
            dir: dir.to_path_buf(),
            manifest,
            written: Vec::new(),
        };
        let text = serde_json::to_string_pretty(&bundle.manifest).expect("manifest serializes");
        bundle.write("manifest.json", format!("{text}\n").as_bytes())?;
        Ok(bundle)
    }

    pub fn stamp(&self) -> &Stamp {
        &self.manifest.stamp
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::File::create(&path)
            .and_then(|mut f| f.write_all(bytes))
            .map_err(|e| CliError::output(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        let bytes = table.to_csv(&self.manifest.stamp.config_digest);
        self.write(name, &bytes)
    }

    /// `{"manifest": <stamp>, "<key>": <value>}`.
    pub fn json<T: Serialize>(&mut self, name: &str, key: &str, value: &T) -> Result<(), CliError> {
        let mut object = serde_json::Map::new();
        object.insert(
            "manifest".into(),
            serde_json::to_value(&self.manifest.stamp).expect("stamp serializes"),
        );
        object.insert(
            key.into(),
            serde_json::to_value(value).map_err(|e| CliError::Numerical(format!("{name}: {e}")))?,
        );
        let text = serde_json::to_string_pretty(&serde_json::Value::Object(object)).expect("value serializes");
        self.write(name, format!("{text}\n").as_bytes())
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, text.as_bytes())
    }
}
