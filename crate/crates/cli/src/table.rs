//! Numeric CSV tables with `# key=value` metadata lines.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { meta: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# version={VERSION}\n");
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Table> {
        let err = |line: usize, message: String| CliError::Parse { path: path.to_path_buf(), line, message };
        let mut table = Table { meta: Vec::new(), columns: Vec::new(), rows: Vec::new() };
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((k, v)) = comment.split_once('=') {
                    table.meta.push((k.trim().into(), v.trim().into()));
                }
                continue;
            }
            if table.columns.is_empty() {
                table.columns = line.split(',').map(|c| c.trim().to_string()).collect();
                continue;
            }
            let row = line
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|_| err(idx + 1, format!("bad number {c:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != table.columns.len() {
                return Err(err(idx + 1, format!("expected {} fields, got {}", table.columns.len(), row.len())));
            }
            table.rows.push(row);
        }
        if table.columns.is_empty() {
            return Err(err(0, "no header row".into()));
        }
        Ok(table)
    }
}
