//! Sample ingestion and result emission.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use crate::empirical::Sample;
use crate::error::{Error, Result};

/// Reads one numeric column, with an optional `value` header. Blank lines
/// are skipped and CRLF line endings accepted.
pub fn read_samples(path: impl AsRef<Path>) -> Result<Sample> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {name}")))?;
    parse_samples(&text, &name)
}

pub fn parse_samples(text: &str, name: &str) -> Result<Sample> {
    let mut values = Vec::new();
    let mut seen_content = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let first = !seen_content;
        seen_content = true;
        if first && line.trim_matches('"').eq_ignore_ascii_case("value") {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: name.to_string(),
            line: i + 1,
            message,
        };
        let v: f64 = line.parse().map_err(|_| err(format!("cannot parse '{line}' as a number")))?;
        if !v.is_finite() {
            return Err(err(format!("non-finite value '{line}'")));
        }
        values.push(v);
    }
    Sample::new(values).map_err(|e| e.context(name.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// A result document and, for CSV output, the rows to tabulate. Without
/// rows the document's own fields form a single row.
pub struct Output {
    pub doc: Map<String, Value>,
    pub rows: Option<Vec<Value>>,
}

impl Output {
    pub fn new(doc: Map<String, Value>) -> Self {
        Output { doc, rows: None }
    }

    pub fn with_rows(doc: Map<String, Value>, rows: Vec<Value>) -> Self {
        Output { doc, rows: Some(rows) }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.doc).expect("serializable");
                s.push('\n');
                s
            }
            Format::Csv => {
                let single = [Value::Object(self.doc.clone())];
                let rows = self.rows.as_deref().unwrap_or(&single);
                csv_table(rows)
            }
        }
    }
}

pub fn write_output(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::from(e).context(format!("writing {}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn cell(v: &Value) -> String {
    let s = match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(a) => a.iter().map(cell).collect::<Vec<_>>().join(";"),
        Value::Object(_) => serde_json::to_string(v).expect("serializable"),
        other => other.to_string(),
    };
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

/// Columns are the union of the row keys in first-seen order.
fn csv_table(rows: &[Value]) -> String {
    let mut cols: Vec<String> = Vec::new();
    for r in rows {
        if let Value::Object(m) = r {
            for k in m.keys() {
                if !cols.contains(k) {
                    cols.push(k.clone());
                }
            }
        }
    }
    let mut out = cols.join(",");
    out.push('\n');
    for r in rows {
        let line: Vec<String> = cols.iter().map(|c| r.get(c).map(cell).unwrap_or_default()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// JSON number, or the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else if x.is_nan() {
        Value::String("nan".into())
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}
