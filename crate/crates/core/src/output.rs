//! CSV and JSON artifact formats.
//!
//! A CSV artifact is a block of `# key=value` metadata lines, a header row,
//! then data rows in `.`-decimal shortest round-trip form. Missing values
//! are empty fields; their reasons go in `# missing=` lines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Provenance stamped into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub schema_version: u32,
    pub scenario: String,
    pub config_hash: String,
    pub dt_ns: f64,
    /// Step-halving result: `None` when verification was off.
    pub verified: Option<bool>,
    pub convergence: Option<f64>,
}

impl ArtifactMeta {
    pub fn new(scenario: &str, config_hash: &str, dt_ns: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: scenario.into(),
            config_hash: config_hash.into(),
            dt_ns,
            verified: None,
            convergence: None,
        }
    }

    pub fn with_verification(mut self, convergence: Option<f64>, tol: f64) -> Self {
        self.convergence = convergence;
        self.verified = convergence.map(|c| c < tol);
        self
    }

    fn lines(&self) -> Vec<(String, String)> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "off".into());
        vec![
            ("schema_version".into(), self.schema_version.to_string()),
            ("scenario".into(), self.scenario.clone()),
            ("config_hash".into(), self.config_hash.clone()),
            ("dt_ns".into(), self.dt_ns.to_string()),
            ("verified".into(), opt(self.verified.map(|v| v.to_string()))),
            (
                "convergence".into(),
                opt(self.convergence.map(|v| v.to_string())),
            ),
        ]
    }
}

/// Rectangular numeric table with optional cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    /// `(row, reason)` for rows with missing cells.
    pub missing: Vec<(usize, String)>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidDimension(format!(
                "row of {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn push_values(&mut self, row: &[f64]) -> Result<()> {
        self.push(row.iter().map(|&v| Some(v)).collect())
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => x.to_string(),
        _ => String::new(),
    }
}

pub fn to_csv(meta: &ArtifactMeta, table: &Table) -> Result<String> {
    let mut out = String::new();
    for (k, v) in meta.lines() {
        out.push_str(&format!("# {k}={v}\n"));
    }
    for (row, reason) in &table.missing {
        out.push_str(&format!("# missing={row}: {}\n", reason.replace('\n', " ")));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&table.columns).map_err(csv_error)?;
    for r in &table.rows {
        w.write_record(r.iter().map(|&v| cell(v)))
            .map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))?);
    Ok(out)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(format!("csv: {e}"))
}

/// Metadata map and table of a CSV artifact.
pub fn from_csv(text: &str) -> Result<(BTreeMap<String, String>, Table)> {
    let mut meta = BTreeMap::new();
    let mut table = Table::default();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim();
        if let Some((k, v)) = body.split_once('=') {
            if k == "missing" {
                if let Some((row, reason)) = v.split_once(": ") {
                    let row = row
                        .parse()
                        .map_err(|_| Error::Validation(format!("bad missing line: {line}")))?;
                    table.missing.push((row, reason.to_string()));
                }
            } else {
                meta.insert(k.to_string(), v.to_string());
            }
        }
    }
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    table.columns = r
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(String::from)
        .collect();
    if table.columns.is_empty() || table.columns.iter().all(|c| c.is_empty()) {
        return Err(Error::Validation("CSV has no header".into()));
    }
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let row = rec
            .iter()
            .map(|s| {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>()
                        .map(Some)
                        .map_err(|_| Error::Validation(format!("non-numeric cell {s:?}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        table.push(row)?;
    }
    Ok((meta, table))
}

/// JSON artifact: `{"meta": ..., "result": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonArtifact<T> {
    pub meta: ArtifactMeta,
    pub result: T,
}

impl<T: Serialize> JsonArtifact<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta() -> ArtifactMeta {
        ArtifactMeta::new("fig3a", "abc123", 0.01).with_verification(Some(3e-8), 1e-6)
    }

    #[test]
    fn header_and_metadata() {
        let mut t = Table::new(&["delta1_mhz", "swap_error"]);
        t.push_values(&[1.5, 0.25]).unwrap();
        t.push(vec![Some(2.0), None]).unwrap();
        t.missing.push((1, "calibration failure".into()));
        let s = to_csv(&meta(), &t).unwrap();
        assert!(s.contains("# schema_version=1\n"));
        assert!(s.contains("# verified=true\n"));
        assert!(s.contains("delta1_mhz,swap_error\n1.5,0.25\n2,\n"));
        let (m, back) = from_csv(&s).unwrap();
        assert_eq!(m["scenario"], "fig3a");
        assert_eq!(m["config_hash"], "abc123");
        assert_eq!(back, t);
    }

    #[test]
    fn row_length_checked() {
        let mut t = Table::new(&["a", "b"]);
        assert!(t.push_values(&[1.0]).is_err());
    }

    #[test]
    fn empty_is_rejected() {
        assert!(from_csv("").is_err());
    }

    #[test]
    fn json_roundtrip() {
        let a = JsonArtifact {
            meta: meta(),
            result: vec![1.0, 2.0],
        };
        let back: JsonArtifact<Vec<f64>> = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
    }

    proptest! {
        #[test]
        fn values_roundtrip_exactly(v in proptest::collection::vec(-1e12..1e12f64, 1..20)) {
            let mut t = Table::new(&["x"]);
            for x in &v {
                t.push_values(&[*x]).unwrap();
            }
            let s = to_csv(&meta(), &t).unwrap();
            let (_, back) = from_csv(&s).unwrap();
            prop_assert_eq!(&back.rows, &t.rows);
            // Same input, same bytes.
            prop_assert_eq!(s, to_csv(&meta(), &t).unwrap());
        }
    }
}
