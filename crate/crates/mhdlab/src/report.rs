//! Tables, verdicts and their serialization.
//!
//! Floats are written with 17 significant digits everywhere, so every
//! emitted number parses back to the same `f64`.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
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

pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(v) => fmt_f64(*v),
            Cell::Text(t) => t.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(i) => Value::from(*i),
            Cell::Num(v) if v.is_finite() => Value::from(*v),
            Cell::Num(v) => Value::from(fmt_f64(*v)),
            Cell::Text(t) => Value::from(t.clone()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Num(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("table `{0}` has no rows")]
    Empty(String),
    #[error("table `{table}`: {message}")]
    Shape { table: String, message: String },
    #[error("malformed table: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A named table with a fixed column order.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Panics on a row of the wrong width: that is a programming error.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[j].as_f64()).collect()
    }

    fn check(&self) -> Result<(), ReportError> {
        if self.rows.is_empty() {
            return Err(ReportError::Empty(self.name.clone()));
        }
        let bad_text = |t: &str| t.contains([',', '\n', '"']);
        if self.columns.iter().any(|c| bad_text(c))
            || self.rows.iter().flatten().any(|c| matches!(c, Cell::Text(t) if bad_text(t)))
        {
            return Err(ReportError::Shape {
                table: self.name.clone(),
                message: "text cells may not contain commas, quotes or newlines".into(),
            });
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        self.check()?;
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(Cell::to_csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        Ok(out)
    }

    /// Cells that parse as integers become `Int`, other numbers `Num`.
    pub fn from_csv(name: &str, text: &str) -> Result<Self, ReportError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| ReportError::Parse("missing header".into()))?;
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let row: Vec<Cell> = line.split(',').map(parse_cell).collect();
            if row.len() != columns.len() {
                return Err(ReportError::Parse(format!("row width in {line:?}")));
            }
            rows.push(row);
        }
        Ok(Table {
            name: name.to_string(),
            columns,
            rows,
        })
    }

    pub fn to_json(&self) -> Result<Value, ReportError> {
        self.check()?;
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::to_json).collect()))
            .collect();
        Ok(serde_json::json!({
            "name": self.name,
            "columns": self.columns,
            "rows": rows,
        }))
    }

    pub fn from_json(v: &Value) -> Result<Self, ReportError> {
        let bad = |m: &str| ReportError::Parse(m.to_string());
        let name = v["name"].as_str().ok_or_else(|| bad("name"))?.to_string();
        let columns: Vec<String> = v["columns"]
            .as_array()
            .ok_or_else(|| bad("columns"))?
            .iter()
            .map(|c| c.as_str().map(str::to_string).ok_or_else(|| bad("column name")))
            .collect::<Result<_, _>>()?;
        let mut rows = Vec::new();
        for r in v["rows"].as_array().ok_or_else(|| bad("rows"))? {
            let cells = r.as_array().ok_or_else(|| bad("row"))?;
            if cells.len() != columns.len() {
                return Err(bad("row width"));
            }
            let row = cells
                .iter()
                .map(|c| match c {
                    Value::Number(n) if n.is_i64() => Ok(Cell::Int(n.as_i64().unwrap())),
                    Value::Number(n) => Ok(Cell::Num(n.as_f64().unwrap())),
                    Value::String(s) => Ok(parse_special(s).unwrap_or_else(|| Cell::Text(s.clone()))),
                    _ => Err(bad("cell")),
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Table {
            name,
            columns,
            rows,
        })
    }
}

fn parse_special(s: &str) -> Option<Cell> {
    match s {
        "NaN" => Some(Cell::Num(f64::NAN)),
        "inf" => Some(Cell::Num(f64::INFINITY)),
        "-inf" => Some(Cell::Num(f64::NEG_INFINITY)),
        _ => None,
    }
}

fn parse_cell(s: &str) -> Cell {
    if let Ok(i) = s.parse::<i64>() {
        return Cell::Int(i);
    }
    if let Some(c) = parse_special(s) {
        return c;
    }
    match s.parse::<f64>() {
        Ok(v) => Cell::Num(v),
        Err(_) => Cell::Text(s.to_string()),
    }
}

/// Pretty JSON with floats in `{:.16e}` form.
struct FullPrecision<'a>(PrettyFormatter<'a>);

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        write!(w, "{v:.16e}")
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, ReportError> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, FullPrecision(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// SHA-256 of the canonical serialization of a validated config.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let text = to_json_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    /// Measured quantity the verdict is based on.
    pub value: f64,
    /// Human-readable statement of the bound.
    pub bound: String,
}

impl Verdict {
    pub fn new(name: &str, passed: bool, value: f64, bound: impl Into<String>) -> Self {
        Verdict {
            name: name.to_string(),
            passed,
            value,
            bound: bound.into(),
        }
    }

    /// `value <= limit`, with the bound spelled out.
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self::new(name, value <= limit, value, format!("<= {limit:e}"))
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self::new(
            name,
            (lo..=hi).contains(&value),
            value,
            format!("in [{lo:e}, {hi:e}]"),
        )
    }
}

/// What a scenario produces.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub scenario: String,
    pub verdicts: Vec<Verdict>,
    pub metrics: serde_json::Map<String, Value>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn new(scenario: &str) -> Self {
        Outcome {
            scenario: scenario.to_string(),
            verdicts: Vec::new(),
            metrics: serde_json::Map::new(),
            tables: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn metric(&mut self, key: &str, value: impl Into<Value>) {
        self.metrics.insert(key.to_string(), value.into());
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Writes every table plus `summary.json` into `dir`; returns the paths in
/// write order.
pub fn emit_report(
    outcome: &Outcome,
    cfg: &ExperimentConfig,
    dir: &Path,
    format: Format,
) -> Result<Vec<PathBuf>, ReportError> {
    if outcome.tables.is_empty() && outcome.verdicts.is_empty() {
        return Err(ReportError::Empty(outcome.scenario.clone()));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut files = Vec::new();
    for t in &outcome.tables {
        let (file, body) = match format {
            Format::Csv => (format!("{}.csv", t.name), t.to_csv()?),
            Format::Json => (format!("{}.json", t.name), to_json_string(&t.to_json()?)?),
        };
        let path = dir.join(&file);
        std::fs::write(&path, body)?;
        files.push(file);
        written.push(path);
    }
    let summary = serde_json::json!({
        "scenario": outcome.scenario,
        "config_hash": config_hash(cfg),
        "config": cfg,
        "passed": outcome.passed(),
        "verdicts": outcome.verdicts,
        "metrics": outcome.metrics,
        "tables": files,
        "notes": outcome.notes,
    });
    let path = dir.join("summary.json");
    std::fs::write(&path, to_json_string(&summary)?)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ExperimentConfig, Scenario};

    fn sample() -> Table {
        let mut t = Table::new("demo", &["eps", "n", "label", "value"]);
        t.push(vec![0.1.into(), 3usize.into(), "+-+".into(), (1.0 / 3.0).into()]);
        t.push(vec![1e-300.into(), (-2i64).into(), "x".into(), f64::NAN.into()]);
        t.push(vec![0.0125.into(), 0usize.into(), "y".into(), 2.5e17.into()]);
        t
    }

    fn same(a: &Table, b: &Table) -> bool {
        a.columns == b.columns
            && a.rows.iter().zip(&b.rows).all(|(x, y)| {
                x.iter().zip(y).all(|(p, q)| match (p, q) {
                    (Cell::Num(u), Cell::Num(v)) => u.to_bits() == v.to_bits() || u.is_nan() && v.is_nan(),
                    _ => p == q,
                })
            })
    }

    #[test]
    fn csv_and_json_round_trip() {
        let t = sample();
        let csv = Table::from_csv("demo", &t.to_csv().unwrap()).unwrap();
        assert!(same(&t, &csv));
        let text = to_json_string(&t.to_json().unwrap()).unwrap();
        let json = Table::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert!(same(&t, &json));
        let back = Table::from_csv("demo", &json.to_csv().unwrap()).unwrap();
        assert!(same(&csv, &back));
    }

    #[test]
    fn empty_results_are_rejected() {
        let t = Table::new("none", &["a"]);
        assert!(matches!(t.to_csv(), Err(ReportError::Empty(_))));
        let cfg = ExperimentConfig::defaults(Scenario::Energy);
        let dir = tempfile::tempdir().unwrap();
        let out = Outcome::new("energy");
        assert!(emit_report(&out, &cfg, dir.path(), Format::Csv).is_err());
    }

    #[test]
    fn emission_is_byte_identical() {
        let cfg = ExperimentConfig::defaults(Scenario::Energy);
        let mut out = Outcome::new("energy");
        out.tables.push(sample());
        out.verdicts.push(Verdict::at_most("demo", 1.0, 2.0));
        out.metric("x", 0.1 + 0.2);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for f in [Format::Csv, Format::Json] {
            let pa = emit_report(&out, &cfg, a.path(), f).unwrap();
            let pb = emit_report(&out, &cfg, b.path(), f).unwrap();
            for (x, y) in pa.iter().zip(&pb) {
                assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
            }
        }
        let summary: Value =
            serde_json::from_str(&std::fs::read_to_string(a.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(summary["metrics"]["x"].as_f64().unwrap(), 0.1 + 0.2);
        assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = ExperimentConfig::defaults(Scenario::Energy);
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed += 1;
        assert_ne!(config_hash(&a), config_hash(&b));
    }
}
