//! Long-format tables written as CSV or JSON, every row stamped with the
//! manifest id.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::manifest::RunManifest;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Bool(bool),
    Text(String),
    Empty,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Num(v) => write!(f, "{v:e}"),
            Cell::Bool(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Empty => Ok(()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn col(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    pub fn to_csv(&self, manifest_id: &str) -> anyhow::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(std::iter::once("manifest_id").chain(self.columns.iter().copied()))?;
        for r in &self.rows {
            w.write_record(std::iter::once(manifest_id.to_string()).chain(r.iter().map(|c| c.to_string())))?;
        }
        Ok(w.into_inner()?)
    }

    pub fn to_json(&self, manifest_id: &str) -> anyhow::Result<Vec<u8>> {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| {
                let mut m = serde_json::Map::new();
                m.insert("manifest_id".into(), manifest_id.into());
                for (c, v) in self.columns.iter().zip(r) {
                    m.insert((*c).into(), serde_json::to_value(v).unwrap_or(serde_json::Value::Null));
                }
                m
            })
            .collect();
        let mut out = serde_json::to_vec_pretty(&rows)?;
        out.push(b'\n');
        Ok(out)
    }
}

/// Writes `<command>.manifest.json` plus one `<command>_<table>.<ext>` per
/// table into `dir`, returning the table paths.
pub fn write_all(dir: &Path, manifest: &mut RunManifest, tables: &[Table], format: Format) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for t in tables {
        manifest
            .tables
            .insert(t.name.clone(), t.columns.iter().map(|c| c.to_string()).collect());
        let path = dir.join(format!("{}_{}.{}", manifest.command, t.name, format.ext()));
        let bytes = match format {
            Format::Csv => t.to_csv(&manifest.id)?,
            Format::Json => t.to_json(&manifest.id)?,
        };
        fs::write(&path, bytes)?;
        paths.push(path);
    }
    let mpath = dir.join(format!("{}.manifest.json", manifest.command));
    fs::write(&mpath, serde_json::to_vec_pretty(manifest)?)?;
    Ok(paths)
}
