use std::fs;
use std::path::{Path, PathBuf};

use super::{Pipeline, ScenarioError};

/// A time series written as CSV: `time` first, then one column per series.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: Vec<String>) -> Self {
        debug_assert_eq!(columns.first().map(String::as_str), Some("time"));
        Self {
            name: name.to_string(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Every value in scientific notation with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:.16e}")))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is ASCII")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultBundle {
    pub pipeline: Pipeline,
    pub summary: serde_json::Value,
    pub tables: Vec<Table>,
}

impl ResultBundle {
    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("json values serialize");
        s.push('\n');
        s
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Write `summary.json` and one `<name>.csv` per table into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, ScenarioError> {
        let io = |p: &Path, e: std::io::Error| ScenarioError::Io(format!("{}: {e}", p.display()));
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut written = Vec::with_capacity(self.tables.len() + 1);
        let path = dir.join("summary.json");
        fs::write(&path, self.summary_json()).map_err(|e| io(&path, e))?;
        written.push(path);
        for t in &self.tables {
            let path = dir.join(format!("{}.csv", t.name));
            fs::write(&path, t.to_csv()).map_err(|e| io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}
