//! Tables rendered as commented CSV or as a JSON object.

use std::io::Write;

use serde_json::{json, Value};

use crate::config::Config;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        Cell::Float(v.unwrap_or(f64::NAN))
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

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_float(*v),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => {
                if s.contains([',', '"', '\n']) {
                    format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
                } else {
                    s.clone()
                }
            }
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) if v.is_finite() => json!(v),
            Cell::Float(_) => Value::Null,
            Cell::Bool(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Scalars written after the rows (`#` comments in CSV, `summary` in JSON).
    pub summary: Vec<(&'static str, Cell)>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &'static str, value: impl Into<Cell>) {
        self.summary.push((key, value.into()));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub fn write_csv(out: &mut impl Write, config: &Config, table: &Table) -> std::io::Result<()> {
    for line in config.to_toml_lines() {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "{}", table.columns.join(","))?;
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(Cell::csv).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    for (k, v) in &table.summary {
        let shown = match v {
            Cell::Text(s) => format!("{s:?}"),
            other => other.csv(),
        };
        writeln!(out, "# {k} = {shown}")?;
    }
    Ok(())
}

pub fn write_json(out: &mut impl Write, config: &Config, table: &Table) -> std::io::Result<()> {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
        .collect();
    let mut summary = serde_json::Map::new();
    for (k, v) in &table.summary {
        summary.insert((*k).to_string(), v.json());
    }
    let mut doc = serde_json::Map::new();
    doc.insert("config".into(), serde_json::to_value(config).expect("config serializes"));
    doc.insert("columns".into(), json!(table.columns));
    doc.insert("rows".into(), Value::Array(rows));
    if !summary.is_empty() {
        doc.insert("summary".into(), Value::Object(summary));
    }
    serde_json::to_writer_pretty(&mut *out, &Value::Object(doc))?;
    writeln!(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_with_17_digits() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = fmt_float(x);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_float(f64::NAN), "NaN");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1usize.into(), 0.5.into()]);
        t.note("q_star", 2.0);
        let cfg = Config {
            depth: Some(3),
            ..Default::default()
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &cfg, &t).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# depth = 3\na,b\n1,5.0000000000000000e-1\n# q_star = 2.0000000000000000e0\n"
        );
    }
}
