//! Tables and the CSV/JSON files they are written to.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

use crate::spec::EMBED_PREFIX;

pub const FORMAT_VERSION: u32 = 1;

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
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
        v.map_or(Cell::Empty, Into::into)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_num(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    // JSON has no infinities; they are written as strings.
    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(v.to_string()),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Converts natural-log columns to base 10 when requested.
#[derive(Debug, Clone, Copy)]
pub struct LogBase {
    pub base10: bool,
}

impl LogBase {
    pub fn col(self, name: &str) -> String {
        if self.base10 {
            name.replacen("log_", "log10_", 1)
        } else {
            name.to_string()
        }
    }

    pub fn val(self, ln_value: f64) -> f64 {
        if self.base10 {
            ln_value / std::f64::consts::LN_10
        } else {
            ln_value
        }
    }
}

/// Everything a command produces: named tables plus scalar metadata, all
/// tied to the resolved spec that produced them.
pub struct Report {
    pub command: &'static str,
    pub spec: BTreeMap<String, String>,
    pub meta: Vec<(String, String)>,
    /// `(name, table)`; with several tables each goes to `PREFIX.name.csv`.
    pub tables: Vec<(String, Table)>,
    /// Extra structured JSON fields.
    pub extra: Map<String, Value>,
    /// Render as a plain-text report (`PREFIX.txt`) rather than CSV.
    pub text_report: bool,
}

impl Report {
    pub fn new(command: &'static str, spec: BTreeMap<String, String>) -> Self {
        Self {
            command,
            spec,
            meta: Vec::new(),
            tables: Vec::new(),
            extra: Map::new(),
            text_report: false,
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    fn preamble(&self, table_name: Option<&str>) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# format_version: {FORMAT_VERSION}");
        let _ = writeln!(s, "# command: {}", self.command);
        for (k, v) in &self.spec {
            let _ = writeln!(s, "{EMBED_PREFIX}{k}={v}");
        }
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        if let Some(name) = table_name {
            let _ = writeln!(s, "# table: {name}");
        }
        s
    }

    pub fn csv(&self, idx: usize) -> String {
        let (name, t) = &self.tables[idx];
        let mut s = self.preamble((self.tables.len() > 1).then_some(name.as_str()));
        s.push_str(&t.header.join(","));
        s.push('\n');
        for row in &t.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Metadata as `key: value` lines followed by any tables.
    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# format_version: {FORMAT_VERSION}");
        let _ = writeln!(s, "# command: {}", self.command);
        for (k, v) in &self.spec {
            let _ = writeln!(s, "{EMBED_PREFIX}{k}={v}");
        }
        for (k, v) in &self.meta {
            let _ = writeln!(s, "{k}: {v}");
        }
        for (name, t) in &self.tables {
            let _ = writeln!(s, "\n{name}:");
            let _ = writeln!(s, "{}", t.header.join(","));
            for row in &t.rows {
                let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                let _ = writeln!(s, "{}", cells.join(","));
            }
        }
        s
    }

    pub fn json(&self) -> String {
        let mut root = Map::new();
        root.insert("format_version".into(), json!(FORMAT_VERSION));
        root.insert("command".into(), json!(self.command));
        root.insert("spec".into(), json!(self.spec));
        let meta: Map<String, Value> = self
            .meta
            .iter()
            .map(|(k, v)| (k.clone(), json!(v)))
            .collect();
        root.insert("meta".into(), Value::Object(meta));
        let mut tables = Map::new();
        for (name, t) in &self.tables {
            let rows: Vec<Value> = t
                .rows
                .iter()
                .map(|r| {
                    Value::Object(
                        t.header
                            .iter()
                            .zip(r)
                            .map(|(h, c)| (h.clone(), c.json()))
                            .collect(),
                    )
                })
                .collect();
            tables.insert(name.clone(), Value::Array(rows));
        }
        root.insert("tables".into(), Value::Object(tables));
        for (k, v) in &self.extra {
            root.insert(k.clone(), v.clone());
        }
        let mut s =
            serde_json::to_string_pretty(&Value::Object(root)).expect("json values serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "both" => Ok(Format::Both),
            _ => Err(format!("unknown format `{s}` (csv, json, both)")),
        }
    }
}

/// Writes `PREFIX.csv` (or `PREFIX.<table>.csv` per table) and `PREFIX.json`;
/// without a prefix everything goes to stdout. Returns the files written.
pub fn emit(report: &Report, out: Option<&PathBuf>, format: Format) -> Result<Vec<PathBuf>> {
    let want_csv = format != Format::Json;
    let want_json = format != Format::Csv;
    let mut written = Vec::new();
    match out {
        None => {
            if want_csv && report.text_report {
                print!("{}", report.text());
            } else if want_csv {
                for i in 0..report.tables.len() {
                    if i > 0 {
                        println!();
                    }
                    print!("{}", report.csv(i));
                }
            }
            if want_json {
                print!("{}", report.json());
            }
        }
        Some(prefix) => {
            let path_for = |ext: &str| {
                let mut s = prefix.clone().into_os_string();
                s.push(ext);
                PathBuf::from(s)
            };
            if want_csv && report.text_report {
                let p = path_for(".txt");
                std::fs::write(&p, report.text())
                    .with_context(|| format!("cannot write `{}`", p.display()))?;
                written.push(p);
            } else if want_csv {
                for (i, (name, _)) in report.tables.iter().enumerate() {
                    let p = if report.tables.len() > 1 {
                        path_for(&format!(".{name}.csv"))
                    } else {
                        path_for(".csv")
                    };
                    std::fs::write(&p, report.csv(i))
                        .with_context(|| format!("cannot write `{}`", p.display()))?;
                    written.push(p);
                }
            }
            if want_json {
                let p = path_for(".json");
                std::fs::write(&p, report.json())
                    .with_context(|| format!("cannot write `{}`", p.display()))?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut spec = BTreeMap::new();
        spec.insert("L".to_string(), "exp(rate=1)".to_string());
        let mut r = Report::new("compute-n", spec);
        let mut t = Table::new(&["arg", "log_p", "status"]);
        t.push(vec![9.0.into(), f64::NEG_INFINITY.into(), "OK".into()]);
        r.tables.push(("n".into(), t));
        r
    }

    #[test]
    fn csv_embeds_spec_before_header() {
        let csv = sample().csv(0);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# format_version: 1");
        assert!(lines.contains(&"# spec: L=exp(rate=1)"));
        assert_eq!(lines[lines.len() - 2], "arg,log_p,status");
        assert_eq!(lines[lines.len() - 1], "9,-inf,OK");
    }

    #[test]
    fn json_writes_infinities_as_strings() {
        let v: Value = serde_json::from_str(&sample().json()).unwrap();
        assert_eq!(v["tables"]["n"][0]["log_p"], json!("-inf"));
        assert_eq!(v["spec"]["L"], json!("exp(rate=1)"));
    }

    #[test]
    fn numbers_round_trip() {
        for v in [
            2.686_973_989_488_844_3e-14,
            1e6,
            -6.907755278982137,
            0.0,
            1e300,
        ] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_num(2.5e-14), "2.5e-14");
        assert_eq!(fmt_num(1e6), "1000000");
    }

    #[test]
    fn base10_renames_log_columns() {
        let b = LogBase { base10: true };
        assert_eq!(b.col("log_p"), "log10_p");
        assert_eq!(b.col("mc_log_p"), "mc_log10_p");
        assert!((b.val(-std::f64::consts::LN_10) + 1.0).abs() < 1e-15);
    }
}
