//! Run reports and their CSV / JSON renderings.
//!
//! Both renderings are pure functions of the report, so identical reports give
//! identical bytes. Floats are written as the shortest decimal that parses
//! back to the same `f64`; JSON objects have sorted keys.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{serialize, ScenarioConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn to_json(&self) -> Value {
        match self {
            Cell::Int(i) => Value::from(*i),
            // non-finite floats become null
            Cell::Float(x) => Value::from(*x),
            Cell::Bool(b) => Value::from(*b),
            Cell::Text(s) => Value::from(s.as_str()),
        }
    }

    fn to_csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(i) => Some(i as f64),
            Cell::Float(x) => Some(x),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// Shortest round-trip decimal; `NaN`, `inf`, `-inf` for non-finite values.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:?}")
    }
}

#[derive(Clone, Debug, PartialEq)]
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

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    /// Numeric column; non-numeric cells become `NaN`.
    pub fn floats(&self, name: &str) -> Option<Vec<f64>> {
        Some(
            self.column(name)?
                .into_iter()
                .map(|c| c.as_f64().unwrap_or(f64::NAN))
                .collect(),
        )
    }

    fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::to_json).collect()))
            .collect();
        let mut m = Map::new();
        m.insert("columns".into(), Value::from(self.columns.clone()));
        m.insert("rows".into(), Value::Array(rows));
        Value::Object(m)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(vec![]);
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::to_csv)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 input")
    }
}

/// Result of one requested analysis: a table and scalar summary, or an error.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisResult {
    pub name: String,
    pub outcome: Result<AnalysisOutput, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisOutput {
    pub table: Table,
    pub summary: BTreeMap<String, Cell>,
}

impl AnalysisResult {
    pub fn output(&self) -> Option<&AnalysisOutput> {
        self.outcome.as_ref().ok()
    }

    pub fn summary_f64(&self, key: &str) -> Option<f64> {
        self.output()?.summary.get(key)?.as_f64()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    /// SHA-256 of the canonical config text, lowercase hex.
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
}

impl Provenance {
    pub fn of(cfg: &ScenarioConfig) -> Self {
        let digest = Sha256::digest(serialize(cfg).as_bytes());
        Self {
            config_hash: hex::encode(digest),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub provenance: Provenance,
    /// In the order requested.
    pub analyses: Vec<AnalysisResult>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl RunReport {
    pub fn get(&self, name: &str) -> Option<&AnalysisResult> {
        self.analyses.iter().find(|a| a.name == name)
    }

    pub fn errors(&self) -> impl Iterator<Item = (&str, &str)> {
        self.analyses
            .iter()
            .filter_map(|a| a.outcome.as_ref().err().map(|e| (a.name.as_str(), e.as_str())))
    }

    pub fn to_json_value(&self) -> Value {
        let mut analyses = Map::new();
        for a in &self.analyses {
            let mut m = Map::new();
            match &a.outcome {
                Ok(out) => {
                    m.insert("table".into(), out.table.to_json());
                    let summary: Map<String, Value> =
                        out.summary.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
                    m.insert("summary".into(), Value::Object(summary));
                }
                Err(e) => {
                    m.insert("error".into(), Value::from(e.as_str()));
                }
            }
            analyses.insert(a.name.clone(), Value::Object(m));
        }
        let mut prov = Map::new();
        prov.insert("config_hash".into(), Value::from(self.provenance.config_hash.as_str()));
        prov.insert("seed".into(), Value::from(self.provenance.seed));
        prov.insert("tool_version".into(), Value::from(self.provenance.tool_version.as_str()));
        let mut root = Map::new();
        root.insert("analyses".into(), Value::Object(analyses));
        root.insert("provenance".into(), Value::Object(prov));
        root.insert("scenario".into(), Value::from(self.scenario.as_str()));
        Value::Object(root)
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json_value()).expect("JSON values always serialize");
        s.push('\n');
        s
    }

    /// `section,key,value` rows: provenance, then each analysis' summary or
    /// error.
    pub fn summary_csv(&self) -> String {
        let mut t = Table::new(&["section", "key", "value"]);
        t.push(vec!["provenance".into(), "scenario".into(), self.scenario.clone().into()]);
        t.push(vec!["provenance".into(), "config_hash".into(), self.provenance.config_hash.clone().into()]);
        t.push(vec!["provenance".into(), "tool_version".into(), self.provenance.tool_version.clone().into()]);
        t.push(vec!["provenance".into(), "seed".into(), Cell::Text(self.provenance.seed.to_string())]);
        for a in &self.analyses {
            match &a.outcome {
                Ok(out) => {
                    for (k, v) in &out.summary {
                        t.push(vec![a.name.clone().into(), k.clone().into(), v.clone()]);
                    }
                }
                Err(e) => t.push(vec![a.name.clone().into(), "error".into(), e.clone().into()]),
            }
        }
        t.to_csv()
    }

    /// `(file name, contents)` for each artifact of the given formats.
    pub fn artifacts(&self, formats: &[Format]) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if formats.contains(&Format::Json) {
            out.push(("report.json".to_string(), self.to_json()));
        }
        if formats.contains(&Format::Csv) {
            for a in &self.analyses {
                if let Ok(o) = &a.outcome {
                    out.push((format!("{}.csv", a.name), o.table.to_csv()));
                }
            }
            out.push(("summary.csv".to_string(), self.summary_csv()));
        }
        out
    }

    /// Writes the artifacts into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path, formats: &[Format]) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        self.artifacts(formats)
            .into_iter()
            .map(|(name, body)| {
                let path = dir.join(name);
                fs::write(&path, body)?;
                Ok(path)
            })
            .collect()
    }
}
