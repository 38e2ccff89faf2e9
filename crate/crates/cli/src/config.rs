//! Experiment configuration: one TOML file per run.
//!
//! ```toml
//! [model]
//! lambda_d = 1.0
//! creation = { kind = "cosine", coeffs = [1.0, 0.7071067811865476] }
//! # or: creation_table_file = "rate.csv"   (two columns: x, value)
//!
//! [truncation]
//! modes = 2
//! max_degree = 14
//!
//! [times]
//! values = [0.0, 0.5, 1.0]    # or: start = 0.0, stop = 1.0, count = 11
//!
//! [integrator]
//! method = "auto"             # auto | expm | rk4
//!
//! [mc]
//! replicas = 100000
//! master_seed = 7
//! bins = 20
//!
//! [outputs]
//! directory = "cdme-out"
//! formats = ["csv", "json", "coo"]
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use cdme_core::generator::IntegratorMethod;
use cdme_core::spectral::RateSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FORMATS: [&str; 3] = ["csv", "json", "coo"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub truncation: TruncationConfig,
    pub times: TimeGrid,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub compare: CompareConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub lambda_d: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub creation: Option<RateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub creation_table_file: Option<PathBuf>,
    /// Gauss–Legendre points for projecting `λ_c`; default `64·modes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub modes: usize,
    pub max_degree: usize,
}

/// Either an explicit list or `count` evenly spaced points.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

impl TimeGrid {
    pub fn list(values: Vec<f64>) -> Self {
        Self {
            values: Some(values),
            ..Self::default()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        match (self.start, self.stop, self.count) {
            (Some(a), Some(b), Some(1)) if a == b => vec![a],
            (Some(a), Some(b), Some(n)) if n >= 2 => (0..n)
                .map(|i| {
                    if i + 1 == n {
                        b
                    } else {
                        a + (b - a) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default)]
    pub method: IntegratorMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_events: Option<u64>,
}

fn default_replicas() -> u64 {
    10_000
}

fn default_bins() -> usize {
    20
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            replicas: default_replicas(),
            master_seed: 0,
            bins: default_bins(),
            max_events: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
    /// Grid size for intensity curves.
    #[serde(default = "default_intensity_points")]
    pub intensity_points: usize,
    /// Kernel slices for `n ≤ 3` at the final time.
    #[serde(default)]
    pub kernel_slices: bool,
    /// Per-replica particle counts from the simulator.
    #[serde(default)]
    pub raw_counts: bool,
}

fn default_directory() -> PathBuf {
    PathBuf::from("cdme-out")
}

fn default_formats() -> Vec<String> {
    FORMATS.iter().map(|s| s.to_string()).collect()
}

fn default_intensity_points() -> usize {
    101
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
            intensity_points: default_intensity_points(),
            kernel_slices: false,
            raw_counts: false,
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Per-metric tolerance overrides, keyed by check name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    /// Largest particle count checked against the simulator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_max_count: Option<usize>,
}

/// A configuration problem, with the line it was found on when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.key.is_empty()) {
            (Some(l), false) => write!(f, "line {l}: {}: {}", self.key, self.message),
            (Some(l), true) => write!(f, "line {l}: {}", self.message),
            (None, false) => write!(f, "{}: {}", self.key, self.message),
            (None, true) => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line on which dotted `key` is assigned, following `[section]`
/// headers. Inline tables and dotted assignments are not traced.
pub fn key_line(text: &str, key: &str) -> Option<usize> {
    let (section, leaf) = match key.rsplit_once('.') {
        Some((s, l)) => (s, l),
        None => ("", key),
    };
    let mut current = String::new();
    let mut section_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim().to_string();
            if current == section {
                section_line = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == leaf {
                    return Some(i + 1);
                }
            }
        }
    }
    section_line
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    /// Parses and validates `text`.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            key: String::new(),
            message: e.message().trim().to_string(),
        })?;
        cfg.validate().map_err(|(key, message)| ConfigError {
            line: key_line(text, &key),
            key,
            message,
        })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Checks every invariant; the error names the offending key.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let err = |k: &str, m: String| Err((k.to_string(), m));
        let m = &self.model;
        if !(m.lambda_d.is_finite() && m.lambda_d >= 0.0) {
            return err(
                "model.lambda_d",
                format!("must be finite and >= 0, got {}", m.lambda_d),
            );
        }
        match (&m.creation, &m.creation_table_file) {
            (None, None) => {
                return err(
                    "model",
                    "set exactly one of `creation` or `creation_table_file`".into(),
                )
            }
            (Some(_), Some(_)) => {
                return err(
                    "model.creation_table_file",
                    "conflicts with `creation`; set only one".into(),
                )
            }
            (Some(spec), None) => {
                if let Err(e) = spec.to_rate_fn() {
                    return err("model.creation", e.to_string());
                }
                if let RateSpec::Constant { gamma } = spec {
                    if !(gamma.is_finite() && *gamma >= 0.0) {
                        return err("model.creation", format!("gamma must be >= 0, got {gamma}"));
                    }
                }
            }
            (None, Some(_)) => {}
        }
        let t = &self.truncation;
        if t.modes < 1 {
            return err("truncation.modes", "must be >= 1".into());
        }
        if let Some(q) = m.quad_points {
            if q < 2 * t.modes {
                return err(
                    "model.quad_points",
                    format!("must be >= 2 * modes = {}, got {q}", 2 * t.modes),
                );
            }
        }

        let g = &self.times;
        let range_keys = g.start.is_some() || g.stop.is_some() || g.count.is_some();
        if g.values.is_some() && range_keys {
            return err(
                "times",
                "use either `values` or `start`/`stop`/`count`".into(),
            );
        }
        if g.values.is_none() {
            match (g.start, g.stop, g.count) {
                (Some(a), Some(b), Some(n)) => {
                    if n == 0 {
                        return err("times.count", "must be >= 1".into());
                    }
                    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
                    if !(b >= a) || (n == 1 && a != b) {
                        return err("times.stop", format!("must be >= start, got {b} < {a}"));
                    }
                }
                _ => {
                    return err(
                        "times",
                        "needs `values` or all of `start`, `stop`, `count`".into(),
                    )
                }
            }
        }
        let pts = g.points();
        if pts.is_empty() {
            return err("times.values", "needs at least one time".into());
        }
        if pts.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return err("times.values", "times must be finite and >= 0".into());
        }
        if pts.windows(2).any(|w| w[1] < w[0]) {
            return err("times.values", "times must be non-decreasing".into());
        }

        if let Some(dt) = self.integrator.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return err("integrator.dt", format!("must be > 0, got {dt}"));
            }
        }
        if self.mc.replicas < 2 {
            return err(
                "mc.replicas",
                format!("must be >= 2, got {}", self.mc.replicas),
            );
        }
        if self.mc.bins < 1 {
            return err("mc.bins", "must be >= 1".into());
        }
        if self.mc.max_events == Some(0) {
            return err("mc.max_events", "must be >= 1".into());
        }
        for f in &self.outputs.formats {
            if !FORMATS.contains(&f.as_str()) {
                return err(
                    "outputs.formats",
                    format!("unknown format {f:?}; expected one of {FORMATS:?}"),
                );
            }
        }
        if self.outputs.intensity_points < 2 {
            return err("outputs.intensity_points", "must be >= 2".into());
        }
        for (k, v) in &self.compare.tolerances {
            if !(v.is_finite() && *v >= 0.0) {
                return err(
                    "compare.tolerances",
                    format!("{k} must be finite and >= 0, got {v}"),
                );
            }
        }
        Ok(())
    }

    /// Reads a two-column `x,value` table, relative to `base` if needed.
    pub fn read_table_file(path: &Path, base: &Path) -> Result<(Vec<f64>, Vec<f64>), ConfigError> {
        let full = if path.is_absolute() {
            path.to_path_buf()
        } else {
            base.join(path)
        };
        let fail = |line: Option<usize>, message: String| ConfigError {
            line,
            key: format!("model.creation_table_file ({})", full.display()),
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(&full)
            .map_err(|e| fail(None, e.to_string()))?;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for rec in reader.records() {
            let rec = rec.map_err(|e| fail(None, e.to_string()))?;
            let line = rec.position().map(|p| p.line() as usize);
            if rec.len() != 2 {
                return Err(fail(
                    line,
                    format!("expected 2 columns, found {}", rec.len()),
                ));
            }
            let (x, y) = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            match (x, y) {
                (Ok(x), Ok(y)) => {
                    xs.push(x);
                    ys.push(y);
                }
                // a header row
                _ if xs.is_empty() && line == Some(1) => continue,
                _ => return Err(fail(line, format!("non-numeric row {:?}", rec.as_slice()))),
            }
        }
        Ok((xs, ys))
    }
}
