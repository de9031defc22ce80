//! Data files and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Format};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    fn value(&self) -> Value {
        match self {
            Cell::Num(v) => number_value(*v),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

/// A table with a header row.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<const N: usize>(name: &str, header: [&str; N], rows: impl IntoIterator<Item = [f64; N]>) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: rows.into_iter().map(|r| r.iter().map(|v| Cell::Num(*v)).collect()).collect(),
        }
    }

    pub fn with_cells(name: &str, header: &[&str], rows: Vec<Vec<Cell>>) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows,
        }
    }

    pub fn to_csv(&self) -> std::io::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))
    }

    pub fn to_json(&self) -> Vec<u8> {
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let m: serde_json::Map<String, Value> = self
                    .header
                    .iter()
                    .zip(r)
                    .map(|(h, v)| (h.clone(), v.value()))
                    .collect();
                Value::Object(m)
            })
            .collect();
        let mut out = serde_json::to_vec_pretty(&records).expect("serializable");
        out.push(b'\n');
        out
    }
}

/// Shortest round-trip representation; non-finite values as `inf`, `-inf`, `nan`.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

fn number_value(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(format_number(v)))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub rows: usize,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Writes `tables` into `dir` in the configured format.
pub fn write_tables(dir: &Path, format: Format, tables: &[Table]) -> std::io::Result<Vec<FileEntry>> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(tables.len());
    for t in tables {
        let (ext, bytes) = match format {
            Format::Csv => ("csv", t.to_csv()?),
            Format::Json => ("json", t.to_json()),
        };
        let file = format!("{}.{ext}", t.name);
        fs::write(dir.join(&file), &bytes)?;
        entries.push(FileEntry {
            path: file,
            rows: t.rows.len(),
            sha256: sha256_hex(&bytes),
        });
    }
    Ok(entries)
}

/// Scalars reported in the manifest, keyed by name.
pub type Scalars = BTreeMap<String, Value>;

pub fn scalar(map: &mut Scalars, key: &str, v: f64) {
    map.insert(key.to_string(), number_value(v));
}

pub fn manifest(
    cfg: &ExperimentConfig,
    files: &[FileEntry],
    scalars: &Scalars,
    failures: &[String],
    wall_time: f64,
) -> Value {
    json!({
        "command": cfg.command.to_string(),
        "config": cfg,
        "versions": {
            "heatwave": heatwave_version(),
            "heatwave-cli": env!("CARGO_PKG_VERSION"),
        },
        "wall_time_s": wall_time,
        "status": if failures.is_empty() { "ok" } else { "invariant-failure" },
        "failures": failures,
        "scalars": scalars,
        "files": files,
    })
}

fn heatwave_version() -> &'static str {
    heatwave::VERSION
}

pub fn write_manifest(dir: &Path, value: &Value) -> std::io::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    fs::write(dir.join("manifest.json"), bytes)
}
