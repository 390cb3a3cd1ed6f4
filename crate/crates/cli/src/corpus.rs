//! The shipped scenario corpus and golden-file comparison.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::Value;

use crate::config::parse_config;
use crate::report::{Format, RunReport};
use crate::runner::run_config;

/// Golden numbers may differ by this much relative to their magnitude...
pub const GOLDEN_REL_TOL: f64 = 1e-9;
/// ...or by this much absolutely.
pub const GOLDEN_ABS_TOL: f64 = 1e-12;

pub struct Shipped {
    pub name: &'static str,
    pub text: &'static str,
}

macro_rules! shipped {
    ($($name:literal),* $(,)?) => {
        &[$(Shipped { name: $name, text: include_str!(concat!("../scenarios/", $name, ".toml")) }),*]
    };
}

pub const SHIPPED: &[Shipped] = shipped![
    "perp_noise_example",
    "prop1_projective",
    "prop1_plus_sector",
    "cnot_first_order",
    "cnot_tilted_generator",
    "scaling_hs",
    "separable_long_run",
    "no_qec_baseline",
    "zero_diagonal_generator",
    "vt_threshold_scan",
];

pub fn shipped(name: &str) -> Option<&'static Shipped> {
    SHIPPED.iter().find(|s| s.name == name)
}

pub fn default_golden_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/golden"))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Match,
    /// First differing JSON path and the two values.
    Drift(String),
    MissingGolden,
    Blessed,
    Failed(String),
}

impl Status {
    pub fn ok(&self) -> bool {
        matches!(self, Status::Match | Status::Blessed)
    }
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub status: Status,
    pub report: Option<RunReport>,
}

#[derive(Clone, Debug, Default)]
pub struct CorpusOptions {
    pub golden: Option<PathBuf>,
    /// Overwrite goldens with the current reports.
    pub bless: bool,
    /// Also write each report under `out/<scenario>/`.
    pub out: Option<PathBuf>,
    pub formats: Vec<Format>,
}

/// Runs every shipped scenario on the current rayon pool.
pub fn run_corpus(opts: &CorpusOptions) -> io::Result<Vec<CorpusEntry>> {
    let golden = opts.golden.clone().unwrap_or_else(default_golden_dir);
    if opts.bless {
        fs::create_dir_all(&golden)?;
    }
    let entries: Vec<CorpusEntry> = SHIPPED
        .par_iter()
        .map(|s| {
            let report = parse_config(s.text.as_bytes())
                .map_err(|e| e.to_string())
                .and_then(|cfg| {
                    run_config(&cfg).map_err(|is| is.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))
                });
            match report {
                Ok(r) => CorpusEntry {
                    name: s.name,
                    status: Status::Match,
                    report: Some(r),
                },
                Err(e) => CorpusEntry {
                    name: s.name,
                    status: Status::Failed(e),
                    report: None,
                },
            }
        })
        .collect();

    // file writes stay on this thread, one writer per file
    let mut out = Vec::with_capacity(entries.len());
    for mut e in entries {
        if let Some(r) = &e.report {
            if let Some(dir) = &opts.out {
                r.write(&dir.join(e.name), &opts.formats)?;
            }
            let path = golden.join(format!("{}.json", e.name));
            let json = r.to_json();
            e.status = if opts.bless {
                fs::write(&path, &json)?;
                Status::Blessed
            } else {
                compare_golden(&path, &json)?
            };
        }
        out.push(e);
    }
    Ok(out)
}

fn compare_golden(path: &Path, json: &str) -> io::Result<Status> {
    let expected = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Status::MissingGolden),
        Err(e) => return Err(e),
    };
    if expected == json {
        return Ok(Status::Match);
    }
    let (a, b): (Value, Value) = match (serde_json::from_str(&expected), serde_json::from_str(json)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return Ok(Status::Drift("golden file is not valid JSON".into())),
    };
    Ok(match first_difference(&a, &b, "$") {
        Some(d) => Status::Drift(d),
        None => Status::Match,
    })
}

/// Structural comparison with a numeric tolerance.
pub fn first_difference(golden: &Value, actual: &Value, path: &str) -> Option<String> {
    match (golden, actual) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64()?, y.as_f64()?);
            let tol = GOLDEN_ABS_TOL + GOLDEN_REL_TOL * x.abs().max(y.abs());
            ((x - y).abs() > tol).then(|| format!("{path}: golden {x}, got {y}"))
        }
        (Value::Array(xs), Value::Array(ys)) => {
            if xs.len() != ys.len() {
                return Some(format!("{path}: golden has {} entries, got {}", xs.len(), ys.len()));
            }
            xs.iter()
                .zip(ys)
                .enumerate()
                .find_map(|(i, (x, y))| first_difference(x, y, &format!("{path}[{i}]")))
        }
        (Value::Object(xs), Value::Object(ys)) => {
            if let Some(k) = xs.keys().chain(ys.keys()).find(|k| xs.contains_key(*k) != ys.contains_key(*k)) {
                return Some(format!("{path}.{k}: present on one side only"));
            }
            xs.iter()
                .find_map(|(k, x)| first_difference(x, &ys[k], &format!("{path}.{k}")))
        }
        (x, y) => (x != y).then(|| format!("{path}: golden {x}, got {y}")),
    }
}
