//! Flat `section.key = value` experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use dqd_core::eigen::DEFAULT_STATES;
use dqd_core::fields::EnvelopeParams;
use dqd_core::grid::{DoubleWellParams, Grid};
use dqd_core::oct::{OptimizationConfig, UpdateScheme};
use dqd_core::propagate::DEFAULT_STRIDE;
use dqd_core::sequence::DEFAULT_CHAIN_LENGTHS;
use dqd_core::sweep::SweepParameter;
use dqd_core::Task;
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub enum ConfigError {
    UnknownKey(String),
    BadValue { key: String, value: String, reason: String },
    Syntax { line: usize, text: String },
    Io { path: PathBuf, source: std::io::Error },
    Invalid(dqd_core::Error),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::UnknownKey(k) => write!(f, "unknown config key `{k}`"),
            ConfigError::BadValue { key, value, reason } => {
                write!(f, "bad value `{value}` for `{key}`: {reason}")
            }
            ConfigError::Syntax { line, text } => {
                write!(f, "line {line}: expected `key = value`, got `{text}`")
            }
            ConfigError::Io { path, source } => write!(f, "cannot read {}: {source}", path.display()),
            ConfigError::Invalid(e) => write!(f, "invalid configuration: {e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<dqd_core::Error> for ConfigError {
    fn from(e: dqd_core::Error) -> Self {
        ConfigError::Invalid(e)
    }
}

/// One `(E0, omega_th)` row of the chain table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableSetting {
    pub fluence: f64,
    pub omega_th: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub omega0: f64,
    pub d: f64,
    pub n_states: usize,
    pub dt: f64,
    pub t_final: f64,
    pub stride: usize,
    pub fluence: f64,
    pub omega_th: f64,
    pub max_iterations: usize,
    pub yield_tolerance: f64,
    pub envelope_a: f64,
    pub envelope_b: f64,
    pub initial_frequency: f64,
    pub scheme: UpdateScheme,
    pub feedback_step: f64,
    pub sweep_parameter: Option<SweepParameter>,
    pub sweep_values: Vec<f64>,
    pub sweep_task: Task,
    pub sequence_n: Vec<usize>,
    pub sequence_rows: Vec<TableSetting>,
    pub sequence_field_n: usize,
    pub sequence_base_field: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let oct = OptimizationConfig::default();
        let grid = Grid::default();
        let well = DoubleWellParams::default();
        Self {
            x_min: grid.x_min(),
            x_max: grid.x_max(),
            n_points: grid.n_points(),
            omega0: well.omega0,
            d: well.d,
            n_states: DEFAULT_STATES,
            dt: oct.dt,
            t_final: oct.t_final,
            stride: DEFAULT_STRIDE,
            fluence: oct.fluence,
            omega_th: oct.omega_th,
            max_iterations: oct.max_iterations,
            yield_tolerance: oct.yield_tolerance,
            envelope_a: oct.envelope.a,
            envelope_b: oct.envelope.b,
            initial_frequency: oct.initial_frequency,
            scheme: oct.scheme,
            feedback_step: oct.feedback_step,
            sweep_parameter: None,
            sweep_values: Vec::new(),
            sweep_task: Task::Transfer,
            sequence_n: DEFAULT_CHAIN_LENGTHS.to_vec(),
            sequence_rows: Vec::new(),
            sequence_field_n: 5,
            sequence_base_field: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

pub const KEYS: [&str; 26] = [
    "grid.x_min",
    "grid.x_max",
    "grid.n_points",
    "system.omega0",
    "system.d",
    "system.n_states",
    "propagation.dt",
    "propagation.T",
    "propagation.stride",
    "oct.E0",
    "oct.omega_th",
    "oct.max_iterations",
    "oct.yield_tolerance",
    "oct.envelope_a",
    "oct.envelope_b",
    "oct.initial_frequency",
    "oct.scheme",
    "oct.feedback_step",
    "sweep.parameter",
    "sweep.values",
    "sweep.task",
    "sequence.n",
    "sequence.rows",
    "sequence.field_n",
    "sequence.base_field",
    "output.dir",
];

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

fn real(key: &str, value: &str) -> Result<f64, ConfigError> {
    match value {
        "inf" | "none" => Ok(f64::INFINITY),
        _ => value
            .parse::<f64>()
            .map_err(|e| bad(key, value, e.to_string()))
            .and_then(|v| if v.is_nan() { Err(bad(key, value, "not a number")) } else { Ok(v) }),
    }
}

fn finite(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v = real(key, value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, value, "must be finite"))
    }
}

fn count(key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse::<usize>().map_err(|e| bad(key, value, e.to_string()))
}

fn list<T>(key: &str, value: &str, item: impl Fn(&str, &str) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| item(key, s))
        .collect()
}

fn fmt_real(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:?}")
    }
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Reads `key = value` lines; `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Parses a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            text: assignment.to_string(),
        })?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "grid.x_min" => self.x_min = finite(key, value)?,
            "grid.x_max" => self.x_max = finite(key, value)?,
            "grid.n_points" => self.n_points = count(key, value)?,
            "system.omega0" => self.omega0 = finite(key, value)?,
            "system.d" => self.d = finite(key, value)?,
            "system.n_states" => self.n_states = count(key, value)?,
            "propagation.dt" => self.dt = finite(key, value)?,
            "propagation.T" => self.t_final = finite(key, value)?,
            "propagation.stride" => self.stride = count(key, value)?,
            "oct.E0" => self.fluence = finite(key, value)?,
            "oct.omega_th" => self.omega_th = real(key, value)?,
            "oct.max_iterations" => self.max_iterations = count(key, value)?,
            "oct.yield_tolerance" => self.yield_tolerance = finite(key, value)?,
            "oct.envelope_a" => self.envelope_a = finite(key, value)?,
            "oct.envelope_b" => self.envelope_b = finite(key, value)?,
            "oct.initial_frequency" => self.initial_frequency = finite(key, value)?,
            "oct.scheme" => {
                self.scheme = match value {
                    "immediate_feedback" => UpdateScheme::ImmediateFeedback,
                    "alternating" => UpdateScheme::Alternating,
                    _ => return Err(bad(key, value, "expected immediate_feedback or alternating")),
                }
            }
            "oct.feedback_step" => self.feedback_step = finite(key, value)?,
            "sweep.parameter" => {
                self.sweep_parameter = Some(value.parse().map_err(|e: dqd_core::Error| bad(key, value, e.to_string()))?)
            }
            "sweep.values" => self.sweep_values = list(key, value, real)?,
            "sweep.task" => {
                self.sweep_task = value.parse().map_err(|e: dqd_core::Error| bad(key, value, e.to_string()))?
            }
            "sequence.n" => self.sequence_n = list(key, value, count)?,
            "sequence.rows" => {
                self.sequence_rows = list(key, value, |k, item| {
                    let (e0, w) = item
                        .split_once(':')
                        .ok_or_else(|| bad(k, item, "expected E0:omega_th"))?;
                    Ok(TableSetting {
                        fluence: finite(k, e0.trim())?,
                        omega_th: real(k, w.trim())?,
                    })
                })?
            }
            "sequence.field_n" => self.sequence_field_n = count(key, value)?,
            "sequence.base_field" => {
                self.sequence_base_field = if value.is_empty() { None } else { Some(PathBuf::from(value)) }
            }
            "output.dir" => self.output_dir = PathBuf::from(value),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self) -> Result<(), ConfigError> {
        Grid::new(self.x_min, self.x_max, self.n_points)?;
        DoubleWellParams::new(self.omega0, self.d)?;
        self.optimization().validate()?;
        if self.n_states < 2 || self.n_states >= self.n_points / 2 {
            return Err(bad("system.n_states", &self.n_states.to_string(), "need 2 <= n_states < n_points / 2"));
        }
        if self.stride == 0 {
            return Err(bad("propagation.stride", "0", "must be at least 1"));
        }
        if self.sequence_n.is_empty() || self.sequence_n.contains(&0) {
            return Err(bad("sequence.n", &join(&self.sequence_n, |n| n.to_string()), "need chain lengths >= 1"));
        }
        if self.sequence_field_n == 0 {
            return Err(bad("sequence.field_n", "0", "must be at least 1"));
        }
        for row in &self.sequence_rows {
            OptimizationConfig {
                fluence: row.fluence,
                omega_th: row.omega_th,
                ..self.optimization()
            }
            .validate()?;
        }
        if let Some(p) = self.sweep_parameter {
            for &v in &self.sweep_values {
                p.apply(&self.optimization(), v).validate()?;
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Ok(Grid::new(self.x_min, self.x_max, self.n_points)?)
    }

    pub fn well(&self) -> Result<DoubleWellParams, ConfigError> {
        Ok(DoubleWellParams::new(self.omega0, self.d)?)
    }

    pub fn optimization(&self) -> OptimizationConfig {
        OptimizationConfig {
            t_final: self.t_final,
            fluence: self.fluence,
            omega_th: self.omega_th,
            envelope: EnvelopeParams {
                a: self.envelope_a,
                b: self.envelope_b,
            },
            initial_frequency: self.initial_frequency,
            max_iterations: self.max_iterations,
            yield_tolerance: self.yield_tolerance,
            dt: self.dt,
            scheme: self.scheme,
            feedback_step: self.feedback_step,
        }
    }

    /// Every key with its resolved value, one `key=value` per line, in
    /// `KEYS` order.
    pub fn canonical(&self) -> String {
        let scheme = match self.scheme {
            UpdateScheme::ImmediateFeedback => "immediate_feedback",
            UpdateScheme::Alternating => "alternating",
        };
        let values = [
            fmt_real(self.x_min),
            fmt_real(self.x_max),
            self.n_points.to_string(),
            fmt_real(self.omega0),
            fmt_real(self.d),
            self.n_states.to_string(),
            fmt_real(self.dt),
            fmt_real(self.t_final),
            self.stride.to_string(),
            fmt_real(self.fluence),
            fmt_real(self.omega_th),
            self.max_iterations.to_string(),
            fmt_real(self.yield_tolerance),
            fmt_real(self.envelope_a),
            fmt_real(self.envelope_b),
            fmt_real(self.initial_frequency),
            scheme.to_string(),
            fmt_real(self.feedback_step),
            self.sweep_parameter.map(|p| p.name().to_string()).unwrap_or_default(),
            join(&self.sweep_values, |v| fmt_real(*v)),
            self.sweep_task.name().to_string(),
            join(&self.sequence_n, |n| n.to_string()),
            join(&self.sequence_rows, |r| format!("{}:{}", fmt_real(r.fluence), fmt_real(r.omega_th))),
            self.sequence_field_n.to_string(),
            self.sequence_base_field
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            self.output_dir.display().to_string(),
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Hex SHA-256 of the canonical form without `output.dir`, so moving
    /// the artifacts does not change their headers.
    pub fn digest(&self) -> String {
        let text: String = self
            .canonical()
            .lines()
            .filter(|l| !l.starts_with("output.dir="))
            .map(|l| format!("{l}\n"))
            .collect();
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
