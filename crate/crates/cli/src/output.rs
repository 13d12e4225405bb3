//! Tabular results and their CSV / JSON / plot-script renderings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

use crate::args::Format;

#[derive(Debug, Clone)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
    Bool(bool),
    Missing,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            // non-finite reals have no JSON form
            Cell::Real(v) if v.is_finite() => json!(v),
            Cell::Real(_) | Cell::Missing => Value::Null,
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
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
        v.map_or(Cell::Missing, Into::into)
    }
}

/// How the generated plot script draws the table.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub x: &'static str,
    pub y: Vec<&'static str>,
    pub title: String,
    pub scatter: bool,
}

#[derive(Debug, Clone)]
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

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    fn json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.to_string(), v.json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

/// Result of one command.
pub struct Report {
    pub table: Table,
    /// Command-specific scalars (rates, exponents, flags).
    pub summary: Value,
    pub plot: Option<PlotSpec>,
}

pub struct Meta {
    pub command: &'static str,
    pub config: Value,
    pub seed: Option<u64>,
}

impl Meta {
    fn value(&self, summary: &Value) -> Value {
        json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "summary": summary,
        })
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}

fn plot_path(out: &Path) -> PathBuf {
    out.with_extension("plot.py")
}

pub fn render(report: &Report, meta: &Meta, format: Format) -> Result<String> {
    Ok(match format {
        Format::Csv => report.table.to_csv(),
        Format::Json => {
            let doc = json!({ "meta": meta.value(&report.summary), "data": report.table.json_rows() });
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            s
        }
    })
}

/// Writes the data file, its metadata sidecar and, if asked, a plot script.
pub fn write_all(
    report: &Report,
    meta: &Meta,
    format: Format,
    out: &Path,
    plot_script: bool,
    elapsed_secs: f64,
) -> Result<()> {
    let body = render(report, meta, format)?;
    fs::write(out, body).with_context(|| format!("writing {}", out.display()))?;

    let mut side = meta.value(&report.summary);
    side["elapsed_seconds"] = json!(elapsed_secs);
    side["data_file"] = json!(out.file_name().map(|f| f.to_string_lossy().into_owned()));
    side["format"] = json!(match format {
        Format::Csv => "csv",
        Format::Json => "json",
    });
    let side_path = sidecar_path(out);
    let mut text = serde_json::to_string_pretty(&side)?;
    text.push('\n');
    fs::write(&side_path, text).with_context(|| format!("writing {}", side_path.display()))?;

    if plot_script {
        if let Some(spec) = &report.plot {
            let path = plot_path(out);
            let data = out.file_name().unwrap_or_default().to_string_lossy().into_owned();
            fs::write(&path, plot_script_text(spec, &data, format))
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}

fn plot_script_text(spec: &PlotSpec, data_file: &str, format: Format) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Plot for {data_file}; run from the directory containing it.");
    let _ = writeln!(s, "import json");
    let _ = writeln!(s, "import os");
    let _ = writeln!(s, "import pandas as pd");
    let _ = writeln!(s, "import matplotlib.pyplot as plt");
    let _ = writeln!(s);
    let _ = writeln!(s, "here = os.path.dirname(os.path.abspath(__file__))");
    let _ = writeln!(s, "path = os.path.join(here, {data_file:?})");
    match format {
        Format::Csv => {
            let _ = writeln!(s, "df = pd.read_csv(path)");
        }
        Format::Json => {
            let _ = writeln!(s, "with open(path) as f:");
            let _ = writeln!(s, "    df = pd.DataFrame(json.load(f)[\"data\"])");
        }
    }
    let _ = writeln!(s, "fig, ax = plt.subplots(figsize=(6, 4))");
    for y in &spec.y {
        if spec.scatter {
            let _ = writeln!(s, "ax.scatter(df[{:?}], df[{y:?}], s=2, label={y:?})", spec.x);
        } else {
            let _ = writeln!(s, "ax.plot(df[{:?}], df[{y:?}], label={y:?})", spec.x);
        }
    }
    let _ = writeln!(s, "ax.set_xlabel({:?})", spec.x);
    let _ = writeln!(s, "ax.set_title({:?})", spec.title);
    let _ = writeln!(s, "ax.legend()");
    let _ = writeln!(s, "fig.tight_layout()");
    let _ = writeln!(s, "fig.savefig(os.path.splitext(path)[0] + \".png\", dpi=150)");
    s
}
