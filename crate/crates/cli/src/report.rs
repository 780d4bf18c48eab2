//! Report types and their on-disk form.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::config::{Experiment, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytic,
    Grid,
    MonteCarlo,
    Fock,
    Covariance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantity {
    pub name: String,
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

/// A property the implementation guarantees; failure is a defect.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Invariant {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

/// A statement about the physics that is evaluated rather than assumed.
/// `holds = false` is a result, not a defect.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

/// A CSV table; cells are stored already formatted.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Self { file: file.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|x| intervene_core::format_f64(*x)).collect());
    }

    /// A row led by a text label.
    pub fn push_labelled(&mut self, label: &str, row: &[f64]) {
        let mut cells = vec![label.to_string()];
        cells.extend(row.iter().map(|x| intervene_core::format_f64(*x)));
        self.rows.push(cells);
    }
}

/// Everything an experiment produces, before it is written out.
#[derive(Debug, Default)]
pub struct Outcome {
    pub results: Vec<Quantity>,
    pub invariants: Vec<Invariant>,
    pub findings: Vec<Finding>,
    pub tables: Vec<Table>,
    /// Files written directly by the experiment, relative to the output dir.
    pub extra_files: Vec<String>,
    pub timings: Vec<(String, f64)>,
}

impl Outcome {
    pub fn result(&mut self, name: &str, value: f64, provenance: Provenance) {
        self.results.push(Quantity { name: name.to_string(), value, provenance });
    }

    pub fn invariant(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        let status = if passed { Status::Pass } else { Status::Fail };
        self.invariants.push(Invariant { name: name.to_string(), status, detail: detail.into() });
    }

    pub fn not_applicable(&mut self, name: &str, detail: impl Into<String>) {
        self.invariants.push(Invariant { name: name.to_string(), status: Status::NotApplicable, detail: detail.into() });
    }

    pub fn finding(&mut self, name: &str, holds: bool, detail: impl Into<String>) {
        self.findings.push(Finding { name: name.to_string(), holds, detail: detail.into() });
    }

    pub fn any_failed(&self) -> bool {
        self.invariants.iter().any(|i| i.status == Status::Fail)
    }
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: Experiment,
    pub seed: u64,
    pub parameters: &'a Params,
    pub status: &'static str,
    pub results: &'a [Quantity],
    pub invariants: &'a [Invariant],
    pub findings: &'a [Finding],
    pub tables: Vec<String>,
}

/// JSON formatter writing every float with 17 significant digits.
struct RoundTrip;

impl serde_json::ser::Formatter for RoundTrip {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Pretty-printed JSON with round-trip floats.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    // indentation comes from wrapping the pretty formatter around ours
    let mut compact = Vec::new();
    value.serialize(&mut serde_json::Serializer::with_formatter(&mut compact, RoundTrip))?;
    let parsed: serde_json::Value = serde_json::from_slice(&compact)?;
    let mut out = Vec::new();
    write_pretty(&parsed, 0, &mut out)?;
    out.push(b'\n');
    Ok(out)
}

fn write_pretty(v: &serde_json::Value, depth: usize, out: &mut Vec<u8>) -> serde_json::Result<()> {
    use serde_json::Value;
    let pad = |d: usize| "  ".repeat(d);
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            out.extend(format!("{x:.16e}").bytes());
        }
        Value::Array(items) if !items.is_empty() => {
            out.extend(b"[\n");
            for (i, item) in items.iter().enumerate() {
                out.extend(pad(depth + 1).bytes());
                write_pretty(item, depth + 1, out)?;
                out.extend(if i + 1 < items.len() { &b",\n"[..] } else { &b"\n"[..] });
            }
            out.extend(pad(depth).bytes());
            out.push(b']');
        }
        Value::Object(map) if !map.is_empty() => {
            out.extend(b"{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                out.extend(pad(depth + 1).bytes());
                out.extend(serde_json::to_vec(k)?);
                out.extend(b": ");
                write_pretty(item, depth + 1, out)?;
                out.extend(if i + 1 < map.len() { &b",\n"[..] } else { &b"\n"[..] });
            }
            out.extend(pad(depth).bytes());
            out.push(b'}');
        }
        other => out.extend(serde_json::to_vec(other)?),
    }
    Ok(())
}

pub fn write_table(dir: &Path, table: &Table) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(dir.join(&table.file))?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
