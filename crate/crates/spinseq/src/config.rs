//! Run configuration: JSON documents, `--set` overrides, unit handling.

use core::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use spinseq_core::scan::{linspace, ScanGrid};
use spinseq_core::sequence::SchemeSpec;
use spinseq_core::spin::{map_phip_to_dnp, Advisory, DnpParams, ErrorModel, PhipParams};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config is not valid JSON at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("missing field `{path}`")]
    MissingField { path: String },
    #[error("bad value at `{path}`: {reason}")]
    BadValue { path: String, reason: String },
}

impl ConfigError {
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Syntax { .. } => None,
            ConfigError::MissingField { path } | ConfigError::BadValue { path, .. } => Some(path),
        }
    }

    fn bad(path: &str, reason: impl Into<String>) -> Self {
        ConfigError::BadValue { path: path.into(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Scan,
    Multiscan,
    Verify,
    Astar,
}

/// `normalized`: angular frequencies in units of A⊥ (or any consistent
/// angular unit). `hz`: ordinary frequencies, multiplied by 2π on ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Normalized,
    Hz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, from = "RawGrid")]
pub struct GridConfig {
    pub delta_over_omega: Axis,
    pub rabi_rel: Axis,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialAxis {
    min: Option<f64>,
    max: Option<f64>,
    n: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    delta_over_omega: Option<PartialAxis>,
    rabi_rel: Option<PartialAxis>,
}

fn fill(p: Option<PartialAxis>, d: Axis) -> Axis {
    match p {
        None => d,
        Some(p) => Axis { min: p.min.unwrap_or(d.min), max: p.max.unwrap_or(d.max), n: p.n.unwrap_or(d.n) },
    }
}

impl From<RawGrid> for GridConfig {
    fn from(r: RawGrid) -> Self {
        Self {
            delta_over_omega: fill(r.delta_over_omega, default_delta_axis()),
            rabi_rel: fill(r.rabi_rel, default_rabi_axis()),
        }
    }
}

fn default_delta_axis() -> Axis {
    Axis { min: -0.5, max: 0.5, n: 41 }
}

fn default_rabi_axis() -> Axis {
    Axis { min: -0.3, max: 0.3, n: 41 }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { delta_over_omega: default_delta_axis(), rabi_rel: default_rabi_axis() }
    }
}

impl GridConfig {
    pub fn to_grid(&self) -> Result<ScanGrid, ConfigError> {
        let d = &self.delta_over_omega;
        let r = &self.rabi_rel;
        ScanGrid::new(linspace(d.min, d.max, d.n), linspace(r.min, r.max, r.n))
            .map_err(|e| ConfigError::bad("grid", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_random_sets")]
    pub random_sets: usize,
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_random_sets() -> usize {
    5
}
fn default_segments() -> usize {
    100
}
fn default_seed() -> u64 {
    20_240_601
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { random_sets: default_random_sets(), segments: default_segments(), seed: default_seed() }
    }
}

fn default_halvings() -> [usize; 2] {
    [2, 2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub units: Units,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dnp: Option<DnpParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phip: Option<PhipParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeSpec>,
    #[serde(default)]
    pub errors: ErrorModel,
    #[serde(default)]
    pub grid: GridConfig,
    /// (A⊥ halvings, ω_I halvings) for multiscan.
    #[serde(default = "default_halvings")]
    pub halvings: [usize; 2],
    /// Repetition cap; default 10·ω_I/A⊥.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default)]
    pub verify: VerifyConfig,
    pub output: String,
}

/// The resolved physical system.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    pub dnp: DnpParams,
    pub phip: Option<PhipParams>,
    pub advisories: Vec<Advisory>,
}

impl RunConfig {
    pub fn system(&self) -> Result<System, ConfigError> {
        match (&self.dnp, &self.phip) {
            (Some(_), Some(_)) => Err(ConfigError::bad("dnp", "give either `dnp` or `phip`, not both")),
            (None, None) => Err(ConfigError::MissingField { path: "dnp".into() }),
            (Some(d), None) => {
                let advisories = d.validate().map_err(|e| ConfigError::bad("dnp", e.to_string()))?;
                Ok(System { dnp: *d, phip: None, advisories })
            }
            (None, Some(p)) => {
                let (dnp, advisories) = map_phip_to_dnp(p).map_err(|e| ConfigError::bad("phip", e.to_string()))?;
                Ok(System { dnp, phip: Some(*p), advisories })
            }
        }
    }

    pub fn scheme(&self) -> Result<&SchemeSpec, ConfigError> {
        self.scheme.as_ref().ok_or(ConfigError::MissingField { path: "scheme".into() })
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.output.trim().is_empty() {
            return Err(ConfigError::bad("output", "output prefix must be non-empty"));
        }
        self.system()?;
        if let Some(s) = &self.scheme {
            if !(s.omega_rabi.is_finite() && s.omega_rabi > 0.0) {
                return Err(ConfigError::bad("scheme.omega_rabi", "must be finite and positive"));
            }
        }
        for (path, v) in [("errors.delta", self.errors.delta), ("errors.rabi_rel", self.errors.rabi_rel)] {
            if !v.is_finite() {
                return Err(ConfigError::bad(path, "must be finite"));
            }
        }
        if self.errors.rabi_rel <= -1.0 {
            return Err(ConfigError::bad("errors.rabi_rel", "must exceed -1"));
        }
        self.grid.to_grid()?;
        if self.n_max == Some(0) {
            return Err(ConfigError::bad("n_max", "must be at least 1"));
        }
        Ok(())
    }

    /// Converts Hz inputs to angular frequencies and marks the config as
    /// normalized, so that emitting and reparsing it is the identity.
    fn normalize_units(&mut self) {
        if self.units != Units::Hz {
            return;
        }
        if let Some(d) = &mut self.dnp {
            d.omega_i *= TAU;
            d.a_perp *= TAU;
            d.omega_s *= TAU;
        }
        if let Some(p) = &mut self.phip {
            p.omega_i0 *= TAU;
            p.omega_s *= TAU;
            p.j *= TAU;
            p.j1 *= TAU;
            p.j2 *= TAU;
        }
        if let Some(s) = &mut self.scheme {
            s.omega_rabi *= TAU;
            if let Some(r) = &mut s.options.sweep_rate {
                *r *= TAU;
            }
        }
        self.errors.delta *= TAU;
        self.units = Units::Normalized;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(syntax_error)?;
    from_value(value)
}

/// Parses a document after applying `key=value` overrides.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut value: Value = serde_json::from_str(text).map_err(syntax_error)?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    from_value(value)
}

fn syntax_error(e: serde_json::Error) -> ConfigError {
    ConfigError::Syntax { line: e.line(), column: e.column(), message: e.to_string() }
}

fn from_value(value: Value) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        if let Some(field) = missing_field_name(&inner) {
            let full = if path == "." || path.is_empty() { field } else { format!("{path}.{field}") };
            ConfigError::MissingField { path: full }
        } else {
            ConfigError::BadValue { path: if path.is_empty() { ".".into() } else { path }, reason: inner }
        }
    })?;
    cfg.validate()?;
    cfg.normalize_units();
    Ok(cfg)
}

fn missing_field_name(msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("missing field `")?;
    Some(rest.split('`').next()?.to_string())
}

/// Sets a dotted `key=value` path in a JSON document. The value is parsed as
/// JSON when possible and taken as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::bad(assignment, "override must look like key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::bad(assignment, "empty key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match cur {
            Value::Object(m) => m,
            other if other.is_null() => {
                *other = Value::Object(Default::default());
                other.as_object_mut().unwrap()
            }
            _ => return Err(ConfigError::bad(&parts[..i].join("."), "cannot set a field inside a non-object")),
        };
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        cur = obj.entry((*part).to_string()).or_insert(Value::Null);
    }
    Ok(())
}
