//! Tabular output in CSV, JSON lines or an aligned human-readable table.
//!
//! Machine formats print numbers with 17 significant digits so they parse
//! back to the identical `f64`; the human table uses 4 decimals.

use std::io::Write;

use crate::args::FormatArg;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Missing,
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

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Num)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, format: FormatArg, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            FormatArg::Csv => self.write_csv(out),
            FormatArg::Jsonl => self.write_jsonl(out),
            FormatArg::Table => self.write_human(out),
        }
    }

    fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(csv_cell).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    fn write_jsonl(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for row in &self.rows {
            let fields: Vec<String> = self
                .columns
                .iter()
                .zip(row)
                .map(|(k, v)| format!("{}:{}", json_string(k), json_cell(v)))
                .collect();
            writeln!(out, "{{{}}}", fields.join(","))?;
        }
        Ok(())
    }

    fn write_human(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let text: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(human_cell).collect())
            .collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|j| {
                text.iter()
                    .map(|r| r[j].len())
                    .chain([self.columns[j].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        writeln!(out, "{}", line(&self.columns))?;
        for r in &text {
            writeln!(out, "{}", line(r))?;
        }
        Ok(())
    }
}

/// 17 significant digits; non-finite values map to `None`.
pub fn format_num(v: f64) -> Option<String> {
    v.is_finite().then(|| format!("{v:.16e}"))
}

fn csv_cell(c: &Cell) -> String {
    match c {
        Cell::Num(v) => format_num(*v).unwrap_or_else(|| {
            if v.is_nan() {
                "NaN".into()
            } else {
                v.to_string()
            }
        }),
        Cell::Int(i) => i.to_string(),
        Cell::Bool(b) => b.to_string(),
        Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Cell::Text(s) => s.clone(),
        Cell::Missing => String::new(),
    }
}

fn json_string(s: &str) -> String {
    serde_json::Value::String(s.to_string()).to_string()
}

fn json_cell(c: &Cell) -> String {
    match c {
        Cell::Num(v) => format_num(*v).unwrap_or_else(|| "null".into()),
        Cell::Int(i) => i.to_string(),
        Cell::Bool(b) => b.to_string(),
        Cell::Text(s) => json_string(s),
        Cell::Missing => "null".into(),
    }
}

fn human_cell(c: &Cell) -> String {
    match c {
        Cell::Num(v) if !v.is_finite() => v.to_string(),
        Cell::Num(v) if *v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e9) => format!("{v:.4e}"),
        Cell::Num(v) => format!("{v:.4}"),
        Cell::Int(i) => i.to_string(),
        Cell::Bool(b) => b.to_string(),
        Cell::Text(s) => s.clone(),
        Cell::Missing => "NA".into(),
    }
}
