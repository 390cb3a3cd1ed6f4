//! Scenario files: a TOML schema with named presets for common operators and
//! kets, a two-stage parse (syntax, then semantic validation that collects
//! every violation) and a canonical serializer.

use std::fmt;

use serde::de::{self, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::scenario::Scenario;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Used for output file and directory names: `[A-Za-z0-9_-]+`.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Seeds every randomized component (random noise operators, the
    /// zero-diagonal fallback search).
    #[serde(default)]
    pub seed: u64,
    /// Number of rounds.
    pub kappa: usize,
    /// Round duration.
    pub dt: f64,
    /// Per-round tables keep every `trace_stride`-th round.
    #[serde(default = "default_stride")]
    pub trace_stride: usize,
    #[serde(default)]
    pub outputs: Vec<Analysis>,
    pub model: ModelSpec,
    #[serde(deserialize_with = "deserialize_state")]
    pub initial_state: StateSpec,
    #[serde(default)]
    pub protocol: ProtocolSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default, skip_serializing_if = "Sweeps::is_empty")]
    pub sweeps: Sweeps,
}

fn default_stride() -> usize {
    1
}

fn default_theta() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub generator: OperatorSpec,
    /// Coupling: `H = θ G`.
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub jumps: Vec<OperatorSpec>,
}

/// A named preset (`"X"`) or a table with exactly one of `name`, `pauli`,
/// `matrix`, `random_traceless`, and an optional real `scale`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Named(String),
    Detailed(OperatorTable),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Coefficients of `X`, `Y`, `Z`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pauli: Option<[f64; 3]>,
    /// Rows of entries; an entry is a real number or `[re, im]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<Entry>>>,
    /// A seeded random traceless operator of this dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_traceless: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

/// Exactly one of the fields. A bare string is shorthand for `ket`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    /// `0`, `1`, `+`, `-`, `+i`, `-i`, or `c+` for the equal superposition
    /// of the two code vectors built from the generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ket: Option<String>,
    /// Qubit Bloch vector, `|r| ≤ 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bloch: Option<[f64; 3]>,
    /// `cos a |0⟩ + sin a |1⟩`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    /// Computational basis vector of the probe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<usize>,
    /// Mixed input: probe marginal `|θ⟩⟨θ|/(1+s) + s/(2(1+s)) I`, with every
    /// round entered through the white-noise mixture of weight `s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vidal_tarrach: Option<VidalTarrachSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VidalTarrachSpec {
    pub theta: f64,
    pub s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    #[serde(default)]
    pub kind: ProtocolName,
    /// Codespace for `prop1_projective`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<CodeName>,
    #[serde(default)]
    pub refresh: Refresh,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolName {
    #[default]
    None,
    CnotPropagation,
    Prop1Projective,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeName {
    Plus,
    Minus,
    Combined,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refresh {
    #[default]
    Fresh,
    Persistent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default)]
    pub method: MethodName,
    #[serde(default = "default_stride")]
    pub substeps: usize,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            method: MethodName::default(),
            substeps: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[default]
    Expm,
    Rk4,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweeps {
    /// Sample times for `qfi` and `scaling`; multiples of `dt` up to `κ dt`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub t: Vec<f64>,
    /// Round durations for `round_error`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dt: Vec<f64>,
    /// White-noise weights for `separability`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub s: Vec<f64>,
    /// Angles for `separability`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub theta: Vec<f64>,
}

impl Sweeps {
    pub fn is_empty(&self) -> bool {
        self.t.is_empty() && self.dt.is_empty() && self.s.is_empty() && self.theta.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Trace,
    Qfi,
    Scaling,
    Separability,
    KlReport,
    SpanReport,
    RoundError,
    IntegratorCheck,
}

impl Analysis {
    pub const ALL: [Analysis; 8] = [
        Analysis::Trace,
        Analysis::Qfi,
        Analysis::Scaling,
        Analysis::Separability,
        Analysis::KlReport,
        Analysis::SpanReport,
        Analysis::RoundError,
        Analysis::IntegratorCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Analysis::Trace => "trace",
            Analysis::Qfi => "qfi",
            Analysis::Scaling => "scaling",
            Analysis::Separability => "separability",
            Analysis::KlReport => "kl_report",
            Analysis::SpanReport => "span_report",
            Analysis::RoundError => "round_error",
            Analysis::IntegratorCheck => "integrator_check",
        }
    }

    /// Whether the analysis reads the per-round protocol trace.
    pub fn needs_trace(self) -> bool {
        matches!(self, Analysis::Trace | Analysis::Qfi | Analysis::Scaling)
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One semantic violation, addressed by a dotted field path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

impl Issue {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config is not valid UTF-8: {0}")]
    Encoding(#[from] std::str::Utf8Error),
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{} validation error(s):\n{}", .0.len(), render_issues(.0))]
    Invalid(Vec<Issue>),
}

fn render_issues(issues: &[Issue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

/// Syntax check only: TOML grammar and the schema's shape.
pub fn parse_syntax(text: &str) -> Result<ScenarioConfig, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|s| line_column(text, s.start)).unwrap_or((1, 1));
        ConfigError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })
}

/// Full parse: syntax, then every semantic check. All violations are
/// reported together.
pub fn parse_config(text: &[u8]) -> Result<ScenarioConfig, ConfigError> {
    let text = std::str::from_utf8(text)?;
    let cfg = parse_syntax(text)?;
    Scenario::build(&cfg).map_err(ConfigError::Invalid)?;
    Ok(cfg)
}

/// Canonical TOML text; `parse_config(serialize(c)) == c`.
pub fn serialize(cfg: &ScenarioConfig) -> String {
    toml::to_string(cfg).expect("scenario configs always serialize")
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl<'de> Deserialize<'de> for OperatorSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = OperatorSpec;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an operator name or an operator table")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                Ok(OperatorSpec::Named(v.to_string()))
            }
            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<Self::Value, A::Error> {
                OperatorTable::deserialize(de::value::MapAccessDeserializer::new(map)).map(OperatorSpec::Detailed)
            }
        }
        d.deserialize_any(V)
    }
}

impl<'de> Deserialize<'de> for Entry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Entry;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a real number or a [re, im] pair")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Ok(Entry::Real(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(Entry::Real(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(Entry::Real(v as f64))
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let re: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let im: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if seq.next_element::<f64>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                Ok(Entry::Complex([re, im]))
            }
        }
        d.deserialize_any(V)
    }
}

impl<'de> Deserialize<'de> for StateSpecOrKet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = StateSpecOrKet;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a ket name or an initial-state table")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                Ok(StateSpecOrKet(StateSpec {
                    ket: Some(v.to_string()),
                    ..StateSpec::default()
                }))
            }
            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<Self::Value, A::Error> {
                StateSpec::deserialize(de::value::MapAccessDeserializer::new(map)).map(StateSpecOrKet)
            }
        }
        d.deserialize_any(V)
    }
}

/// Accepts `initial_state = "+"` as well as a table.
struct StateSpecOrKet(StateSpec);

pub(crate) fn deserialize_state<'de, D: Deserializer<'de>>(d: D) -> Result<StateSpec, D::Error> {
    StateSpecOrKet::deserialize(d).map(|s| s.0)
}
