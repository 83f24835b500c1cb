//! Result tables and their CSV / JSON encodings.

use std::fmt::Write as _;

use serde_json::{Map, Number, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Uint(u64),
    Float(f64),
    Bool(bool),
    Text(String),
    Empty,
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Uint(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Uint(v as u64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Uint(v as u64)
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

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
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

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Uint(v) => v.to_string(),
            Cell::Float(v) => float_text(*v),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Uint(v) => Value::from(*v),
            Cell::Float(v) => Number::from_f64(*v).map_or_else(|| Value::String(float_text(*v)), Value::Number),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Uint(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            _ => None,
        }
    }
}

/// Shortest round-trip decimal, with `inf`/`-inf`/`nan` spelled out.
fn float_text(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

/// Rows under a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Cells of one column, in row order.
    pub fn values(&self, name: &str) -> Vec<&Cell> {
        let j = self.column(name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| &r[j]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory csv");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 cells")
    }

    pub fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (name, cell) in self.columns.iter().zip(row) {
                    obj.insert((*name).to_owned(), cell.json());
                }
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

/// Output encoding, chosen by file extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn from_path(path: &str) -> Format {
        if path.to_ascii_lowercase().ends_with(".json") {
            Format::Json
        } else {
            Format::Csv
        }
    }
}

/// Encodes a table. Without `deterministic` a `# generated <unix seconds>`
/// line (CSV) or `generated` field (JSON) is added.
pub fn render(table: &Table, experiment: &str, format: Format, deterministic: bool) -> String {
    let stamp = (!deterministic).then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    match format {
        Format::Csv => {
            let mut out = String::new();
            if let Some(t) = stamp {
                let _ = writeln!(out, "# generated {t}");
            }
            out.push_str(&table.to_csv());
            out
        }
        Format::Json => {
            let mut doc = Map::new();
            doc.insert("experiment".into(), Value::String(experiment.into()));
            if let Some(t) = stamp {
                doc.insert("generated".into(), Value::from(t));
            }
            doc.insert("columns".into(), Value::from(table.columns.clone()));
            doc.insert("rows".into(), table.to_json());
            let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("json encoding");
            s.push('\n');
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(vec!["n", "value", "note"]);
        t.push(vec![3u64.into(), 0.1.into(), "a,b".into()]);
        t.push(vec![4u64.into(), f64::INFINITY.into(), Cell::Empty]);
        assert_eq!(t.to_csv(), "n,value,note\n3,0.1,\"a,b\"\n4,inf,\n");
        let det = render(&t, "x", Format::Csv, true);
        assert!(det.starts_with("n,value"));
        assert!(render(&t, "x", Format::Csv, false).starts_with("# generated "));
    }

    #[test]
    fn json_layout() {
        let mut t = Table::new(vec!["n", "ok"]);
        t.push(vec![1u64.into(), true.into()]);
        let v: Value = serde_json::from_str(&render(&t, "demo", Format::Json, true)).unwrap();
        assert_eq!(v["rows"][0]["ok"], Value::Bool(true));
        assert_eq!(v["experiment"], "demo");
        assert!(v.get("generated").is_none());
        assert_eq!(Format::from_path("out.JSON"), Format::Json);
        assert_eq!(Format::from_path("out.csv"), Format::Csv);
    }
}
