//! Versioned CSV tables for the plotting layer.
//!
//! Every file starts with one comment line
//! `# schema: <kind>/<version>, config_hash=<hash>, seed=<seed>`
//! followed by a header row and the data rows.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Table kinds and their schema versions. A column change must bump the version.
pub const SCHEMAS: &[(&str, u32, &[&str])] = &[
    ("green-asymptotics", 1, &["d", "g0", "g_e1", "two_d_g0_minus_1"]),
    ("ubiquity-sweep", 1, &["d", "u", "successes", "trials", "p", "lower", "upper"]),
    ("ustar-vs-logd", 1, &["d", "log_d", "side", "n_samples", "censored", "u_half", "ci_lower", "ci_upper"]),
    ("tree-survival", 1, &["k", "tree_size", "mean_t0", "mean_t_prime", "alive", "trials", "alive_lower", "alive_upper"]),
    ("law-validation", 1, &["d", "probe", "size", "u", "capacity", "expected", "observed", "lower", "upper", "z"]),
    ("sprinkle-merge", 1, &["event", "successes", "trials", "p", "lower", "upper"]),
    ("certificate", 1, &["n", "eps", "b", "eps_ok", "b_ok"]),
];

pub fn schema(kind: &str) -> Result<(u32, &'static [&'static str])> {
    SCHEMAS
        .iter()
        .find(|(k, _, _)| *k == kind)
        .map(|&(_, v, cols)| (v, cols))
        .ok_or_else(|| Error::Format(format!("unknown table kind {kind}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvTable {
    pub kind: String,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(kind: &str) -> Result<Self> {
        schema(kind)?;
        Ok(CsvTable { kind: kind.into(), rows: Vec::new() })
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        let (_, cols) = schema(&self.kind)?;
        if row.len() != cols.len() {
            return Err(Error::Format(format!("{} row has {} fields, schema has {}", self.kind, row.len(), cols.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn render(&self, config_hash: &str, seed: u64) -> Result<String> {
        let (version, cols) = schema(&self.kind)?;
        let mut s = String::new();
        writeln!(s, "# schema: {}/{version}, config_hash={config_hash}, seed={seed}", self.kind).expect("string write");
        s.push_str(&cols.join(","));
        s.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|f| quote(f)).collect();
            s.push_str(&fields.join(","));
            s.push('\n');
        }
        Ok(s)
    }

    pub fn write(&self, path: &Path, config_hash: &str, seed: u64) -> Result<()> {
        fs::write(path, self.render(config_hash, seed)?)?;
        Ok(())
    }
}

/// Full-precision float formatting (shortest round-trip representation).
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn quote(f: &str) -> String {
    if f.contains([',', '"', '\n']) {
        format!("\"{}\"", f.replace('"', "\"\""))
    } else {
        f.to_string()
    }
}
