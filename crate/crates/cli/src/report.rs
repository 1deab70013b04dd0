//! Deterministic CSV bodies and the versioned JSON summary.

use serde_json::{json, Value};
use std::path::Path;

pub const REPORT_SCHEMA: &str = "qmod-report/1";

/// Scientific notation with 12 significant digits.
pub fn fmt12(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

/// A CSV table with a header row; the body is byte-deterministic for a
/// fixed config and seed.
#[derive(Debug, Clone)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        assert_eq!(row.len(), self.header.len(), "CSV row arity mismatch");
        self.rows.push(row);
    }

    pub fn body(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.header.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// The per-run summary: command, echoed inputs, outputs, empirical
/// constants, pass flags, seed, runtime.
pub struct Summary {
    pub command: String,
    pub inputs: Value,
    pub outputs: Value,
    pub empirical_constants: Value,
    pub pass_flags: Value,
    pub seed: u64,
}

impl Summary {
    pub fn to_json(&self, runtime_seconds: f64) -> Value {
        json!({
            "schema": REPORT_SCHEMA,
            "command": self.command,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "empirical_constants": self.empirical_constants,
            "pass_flags": self.pass_flags,
            "seed": self.seed,
            "runtime_seconds": runtime_seconds,
        })
    }

    /// True when every boolean under `pass_flags` is set.
    pub fn all_passed(&self) -> bool {
        fn walk(v: &Value) -> bool {
            match v {
                Value::Bool(b) => *b,
                Value::Object(m) => m.values().all(walk),
                Value::Array(a) => a.iter().all(walk),
                _ => true,
            }
        }
        walk(&self.pass_flags)
    }
}

/// Write the CSV and summary files for one experiment run.
pub fn write_report(
    out_dir: &Path,
    command: &str,
    table: &CsvTable,
    summary: &Summary,
    runtime_seconds: f64,
) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{command}.csv"));
    std::fs::write(&csv_path, table.body())?;
    let json_path = out_dir.join(format!("{command}_summary.json"));
    let mut text = serde_json::to_string_pretty(&summary.to_json(runtime_seconds))
        .expect("summary serializes");
    text.push('\n');
    std::fs::write(&json_path, text)?;
    Ok(())
}
