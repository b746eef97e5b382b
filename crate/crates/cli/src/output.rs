//! Table rendering with a provenance header (config hash and seed).

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::Format;

/// Numeric table with unit-bearing column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// Command result ready to be written.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub command: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    /// Scalar results, also echoed in the CSV header.
    pub notes: Vec<(String, String)>,
    pub table: Table,
    /// Structured results included in JSON output only.
    pub extra: Option<Value>,
}

impl Output {
    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    fn header_lines(&self) -> Vec<(String, String)> {
        let mut lines = vec![
            (
                "generator".to_string(),
                format!("omitlab {}", env!("CARGO_PKG_VERSION")),
            ),
            ("command".to_string(), self.command.to_string()),
            ("config_sha256".to_string(), self.config_sha256.clone()),
            ("seed".to_string(), self.seed.to_string()),
        ];
        lines.extend(self.notes.iter().cloned());
        lines
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.header_lines() {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&self.table.columns.join(","));
        out.push('\n');
        for row in &self.table.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn render_json(&self) -> String {
        let mut meta = Map::new();
        for (k, v) in self.header_lines() {
            meta.insert(k, Value::String(v));
        }
        let rows: Vec<Value> = self
            .table
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .table
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.to_string(), json!(v)))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut doc = json!({ "meta": meta, "rows": rows });
        if let Some(extra) = &self.extra {
            doc["results"] = extra.clone();
        }
        let mut s = serde_json::to_string_pretty(&doc).expect("JSON values always serialize");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    /// Write to `dir/<command>.<ext>` and return the path.
    pub fn write(&self, dir: &Path, format: Format) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let ext = match format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        let path = dir.join(format!("{}.{ext}", self.command));
        std::fs::write(&path, self.render(format))?;
        Ok(path)
    }
}
