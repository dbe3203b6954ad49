//! Tables written as CSV with a `#` comment header or as a JSON document
//! whose leading `header` object carries the same information.
//!
//! Floats use the shortest decimal that round-trips, rows keep input order
//! and lines end in LF, so identical configs give byte-identical files.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:?}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::String(format!("{v:?}")), Value::Number),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
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

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
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

/// Column-labelled rows plus a summary object for derived verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Value,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: Value::Object(Default::default()),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn summarize(&mut self, key: &str, value: Value) {
        if let Value::Object(map) = &mut self.summary {
            map.insert(key.to_string(), value);
        }
    }
}

/// Provenance echoed at the top of every output.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub command: String,
    pub config: Value,
}

pub fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

pub fn render(header: &Header, table: &Table, format: Format) -> CliResult<String> {
    match format {
        Format::Csv => Ok(render_csv(header, table)?),
        Format::Json => render_json(header, table),
    }
}

fn render_csv(header: &Header, table: &Table) -> CliResult<String> {
    let mut out = String::new();
    out.push_str(&format!("# bqf {} {}\n", version(), header.command));
    out.push_str(&format!("# config: {}\n", serde_json::to_string(&header.config)?));
    if table.summary.as_object().is_some_and(|m| !m.is_empty()) {
        out.push_str(&format!("# summary: {}\n", serde_json::to_string(&table.summary)?));
    }
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(Cell::csv).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn render_json(header: &Header, table: &Table) -> CliResult<String> {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|row| Value::Array(row.iter().map(Cell::json).collect()))
        .collect();
    let doc = json!({
        "header": {
            "tool": "bqf",
            "version": version(),
            "command": header.command,
            "config": header.config,
        },
        "summary": table.summary,
        "columns": table.columns,
        "rows": rows,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(text: &str, path: Option<&std::path::Path>) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (Header, Table) {
        let header = Header {
            command: "demo".into(),
            config: json!({"beta": 1.0, "grid": [0.1, 1e-20]}),
        };
        let mut table = Table::new(&["x", "n", "label"]);
        table.push(vec![0.1.into(), 3usize.into(), "Regular".into()]);
        table.push(vec![1e-20.into(), 0usize.into(), "Divergent".into()]);
        table.push(vec![(1.0 / 3.0).into(), 7usize.into(), true.into()]);
        (header, table)
    }

    #[test]
    fn csv_has_header_and_round_trip_floats() {
        let (header, table) = sample();
        let text = render(&header, &table, Format::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("# bqf {} demo", version()));
        assert!(lines[1].starts_with("# config: {\"beta\":1.0"));
        assert_eq!(lines[2], "x,n,label");
        assert_eq!(lines[3], "0.1,3,Regular");
        assert_eq!(lines[4], "1e-20,0,Divergent");
        let third: f64 = lines[5].split(',').next().unwrap().parse().unwrap();
        assert_eq!(third, 1.0 / 3.0);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn json_carries_the_same_numbers() {
        let (header, table) = sample();
        let doc: Value = serde_json::from_str(&render(&header, &table, Format::Json).unwrap()).unwrap();
        let keys: Vec<&String> = doc.as_object().unwrap().keys().collect();
        assert_eq!(keys[0], "header");
        assert_eq!(doc["header"]["command"], "demo");
        assert_eq!(doc["rows"][2][0].as_f64().unwrap(), 1.0 / 3.0);
        assert_eq!(doc["rows"][1][0].as_f64().unwrap(), 1e-20);
    }

    #[test]
    fn summary_line_only_when_present() {
        let (header, mut table) = sample();
        assert!(!render(&header, &table, Format::Csv).unwrap().contains("# summary"));
        table.summarize("verdict", json!("Converged"));
        let text = render(&header, &table, Format::Csv).unwrap();
        assert_eq!(text.lines().nth(2).unwrap(), "# summary: {\"verdict\":\"Converged\"}");
    }
}
