//! CSV tables and the JSON sidecar.
//!
//! Every CSV starts with `#`-prefixed header lines (toolkit version,
//! experiment kind, spec hash, master seed), then one column-name line, then
//! the body. Floats use the shortest representation that round-trips;
//! infinities are written as `inf` and missing values as an empty field.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Missing,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Float(f) => Some(*f),
            Cell::Bool(b) => Some(f64::from(u8::from(*b))),
            _ => None,
        }
    }

    fn render(&self, out: &mut String) {
        match self {
            Cell::Int(i) => write!(out, "{i}").expect("write to string"),
            Cell::Float(f) => out.push_str(&format_float(*f)),
            Cell::Text(s) => out.push_str(s),
            Cell::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Cell::Missing => {}
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
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

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Missing, Into::into)
    }
}

/// Plain decimal in `[1e-4, 1e15)`, scientific otherwise.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v == 0.0 || (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match table {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric view of a column; non-numeric cells become NaN.
    pub fn column(&self, name: &str) -> Vec<f64> {
        let Some(i) = self.column_index(name) else {
            return Vec::new();
        };
        self.rows.iter().map(|r| r[i].as_f64().unwrap_or(f64::NAN)).collect()
    }

    /// Column-name line and body.
    pub fn csv_body(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.render(&mut out);
            }
            out.push('\n');
        }
        out
    }
}

/// Provenance written above every table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Header {
    pub version: String,
    pub kind: String,
    pub spec_hash: String,
    pub master_seed: u64,
}

impl Header {
    pub fn lines(&self) -> String {
        format!(
            "# ehcs {}\n# kind: {}\n# spec-sha256: {}\n# master-seed: {}\n",
            self.version, self.kind, self.spec_hash, self.master_seed
        )
    }
}

pub fn render_csv(header: &Header, table: &Table) -> String {
    let mut out = header.lines();
    if table.name != "main" {
        out.push_str(&format!("# table: {}\n", table.name));
    }
    out.push_str(&table.csv_body());
    out
}

/// Body of a rendered CSV, i.e. everything after the `#` header lines.
pub fn strip_header(csv: &str) -> &str {
    let mut rest = csv;
    while rest.starts_with('#') {
        rest = rest.find('\n').map_or("", |i| &rest[i + 1..]);
    }
    rest
}

/// `dir/stem.name.csv` next to the main output `dir/stem.csv`.
pub fn sibling_path(main: &Path, name: &str, ext: &str) -> PathBuf {
    let stem = main.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let file = if name.is_empty() { format!("{stem}.{ext}") } else { format!("{stem}.{name}.{ext}") };
    main.with_file_name(file)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_rendering() {
        assert_eq!(format_float(0.1), "0.1");
        assert_eq!(format_float(1e-7), "1e-7");
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(1546.0685), "1546.0685");
        assert_eq!("1e-7".parse::<f64>().unwrap(), 1e-7);
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new("main", &["a", "b"]);
        t.push(vec![Cell::from(1usize), Cell::from(Some(0.5))]);
        t.push(vec![Cell::from(2usize), Cell::from(None::<f64>)]);
        let header = Header { version: "0".into(), kind: "x".into(), spec_hash: "h".into(), master_seed: 3 };
        let csv = render_csv(&header, &t);
        assert_eq!(strip_header(&csv), "a,b\n1,0.5\n2,\n");
        assert!(csv.starts_with("# ehcs 0\n"));
        assert_eq!(t.column("b")[0], 0.5);
        let p = sibling_path(Path::new("/tmp/run/fig3.csv"), "trials", "csv");
        assert_eq!(p, Path::new("/tmp/run/fig3.trials.csv"));
    }
}
