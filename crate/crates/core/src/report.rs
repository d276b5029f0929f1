//! Output tables in CSV or JSON, and the plain-text regression table.
//!
//! CSV follows RFC 4180 quoting with LF line endings. Numbers are formatted without any
//! locale, so the decimal separator is always '.'. JSON keeps full floating-point
//! precision; fixed-decimal CSV cells are written unrounded there.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::logit::LogitFit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Uint(u64),
    /// Shortest round-trip representation.
    Float(f64),
    /// Fixed number of decimals in CSV, full precision in JSON.
    Fixed(f64, usize),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Uint(v) => v.to_string(),
            Cell::Float(v) if v.is_finite() => v.to_string(),
            Cell::Fixed(v, d) if v.is_finite() => format!("{v:.d$}"),
            Cell::Float(_) | Cell::Fixed(..) | Cell::Empty => String::new(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Uint(v) => Value::from(*v),
            Cell::Float(v) | Cell::Fixed(v, _) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

/// A rectangular table with named columns.
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
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    /// Array of objects keyed by column name.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .cloned()
                        .zip(row.iter().map(Cell::json))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }

    /// Writes `<stem>.csv` or `<stem>.json` into `dir` and returns the file name.
    pub fn write(&self, dir: &Path, stem: &str, format: Format) -> io::Result<String> {
        let name = format!("{stem}.{}", format.extension());
        let body = match format {
            Format::Csv => self.to_csv(),
            Format::Json => json_text(&self.to_json()),
        };
        fs::write(dir.join(&name), body)?;
        Ok(name)
    }
}

/// Pretty JSON with a trailing newline.
pub fn json_text(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let value = serde_json::to_value(value).map_err(io::Error::other)?;
    fs::write(path, json_text(&value))
}

/// Tracks the files a command writes, for the manifest.
#[derive(Debug, Default, Clone)]
pub struct Outputs {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, files: Vec::new() })
    }

    pub fn table(&mut self, table: &Table, stem: &str, format: Format) -> io::Result<()> {
        let name = table.write(&self.dir, stem, format)?;
        self.files.push(name);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        write_json(&self.dir.join(name), value)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> io::Result<()> {
        fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Registers a file written by someone else.
    pub fn record(&mut self, name: &str) {
        self.files.push(name.to_string());
    }
}

/// `x` rounded to three significant figures.
pub fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (2 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new digit (0.09996 -> 0.1000); drop the extra zero.
    let rounded: f64 = s.parse().unwrap_or(x);
    let carried = rounded.abs().log10().floor() as i32;
    if carried > magnitude && decimals > 0 {
        let d = decimals - 1;
        format!("{x:.d$}")
    } else {
        s
    }
}

/// Significance stars for p < 0.10, 0.05, 0.01.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

/// A regression table with one column per specification. `rows` gives the term keys and
/// their display labels in order; failed specifications show their error message.
pub fn regression_table(rows: &[(&str, &str)], fits: &[Result<LogitFit, String>]) -> String {
    let label_w = rows
        .iter()
        .map(|(_, l)| l.chars().count())
        .chain(["Observations".len(), "Pseudo R2".len()])
        .max()
        .unwrap_or(0)
        + 2;
    let col_w = 13;
    let mut out = String::new();
    let pad = |s: &str, w: usize| format!("{s}{}", " ".repeat(w.saturating_sub(s.chars().count())));
    let _ = write!(out, "{}", pad("", label_w));
    for k in 1..=fits.len() {
        let _ = write!(out, "{}", pad(&format!("({k})"), col_w));
    }
    out = out.trim_end().to_string();
    out.push('\n');
    let rule = "-".repeat(label_w + col_w * fits.len());
    out.push_str(&rule);
    out.push('\n');
    for (key, label) in rows {
        let mut est = pad(label, label_w);
        let mut pv = pad("", label_w);
        for fit in fits {
            let (e, p) = match fit.as_ref().ok().and_then(|f| f.get(key)) {
                Some(c) => (format!("{}{}", sig3(c.estimate), stars(c.p_value)), format!("({:.3})", c.p_value)),
                None => (String::new(), String::new()),
            };
            est.push_str(&pad(&e, col_w));
            pv.push_str(&pad(&p, col_w));
        }
        out.push_str(est.trim_end());
        out.push('\n');
        out.push_str(pv.trim_end());
        out.push('\n');
    }
    out.push_str(&rule);
    out.push('\n');
    let mut obs = pad("Observations", label_w);
    let mut r2 = pad("Pseudo R2", label_w);
    for fit in fits {
        match fit {
            Ok(f) => {
                obs.push_str(&pad(&f.n_observations.to_string(), col_w));
                r2.push_str(&pad(&format!("{:.3}", f.pseudo_r2), col_w));
            }
            Err(_) => {
                obs.push_str(&pad("n/a", col_w));
                r2.push_str(&pad("n/a", col_w));
            }
        }
    }
    out.push_str(obs.trim_end());
    out.push('\n');
    out.push_str(r2.trim_end());
    out.push('\n');
    out.push_str("p-values in parentheses; * p<0.10, ** p<0.05, *** p<0.01\n");
    for (k, fit) in fits.iter().enumerate() {
        if let Err(e) = fit {
            let _ = writeln!(out, "({}) failed: {e}", k + 1);
        }
    }
    out
}
