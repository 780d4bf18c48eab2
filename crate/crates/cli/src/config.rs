//! Experiment schemas, config files and parameter overrides.
//!
//! A config file is TOML with optional top-level `seed` and `output_dir` and
//! one table per experiment:
//!
//! ```toml
//! seed = 7
//!
//! [classical-intervention]
//! apparatus_variance = 0.5
//! trials = 200000
//! ```
//!
//! Precedence is flags > file > defaults; the output directory falls back to
//! `INTERVENE_OUTPUT_DIR` and then `intervene-out`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use thiserror::Error;

pub const OUTPUT_DIR_ENV: &str = "INTERVENE_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "intervene-out";
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Syntax { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Field { path: String, line: usize, message: String },
    #[error("--param {0}: expected key=value")]
    MalformedOverride(String),
    #[error("parameter `{name}` is not defined for {experiment} (known: {known})")]
    UnknownParameter { experiment: Experiment, name: String, known: String },
    #[error("parameter `{name}`: {reason}")]
    BadValue { name: String, reason: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ClassicalIntervention,
    EquivalencePair,
    CollisionGrid,
    CollisionGaussian,
    OscillatorBinary,
    McValidate,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::ClassicalIntervention,
        Experiment::EquivalencePair,
        Experiment::CollisionGrid,
        Experiment::CollisionGaussian,
        Experiment::OscillatorBinary,
        Experiment::McValidate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ClassicalIntervention => "classical-intervention",
            Experiment::EquivalencePair => "equivalence-pair",
            Experiment::CollisionGrid => "collision-grid",
            Experiment::CollisionGaussian => "collision-gaussian",
            Experiment::OscillatorBinary => "oscillator-binary",
            Experiment::McValidate => "mc-validate",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    pub fn schema(self) -> &'static [ParamSpec] {
        use ParamKind::{Count, Flag, NonNegative, Positive, Real};
        match self {
            Experiment::ClassicalIntervention => const { &[
                ParamSpec::new("mass", Positive, 1.0),
                ParamSpec::new("temperature", Positive, 1.0),
                ParamSpec::new("coupling", Real, 1.0),
                ParamSpec::new("apparatus_variance", Positive, 1.0),
                ParamSpec::new("trials", Count, 1e6),
                ParamSpec::new("grid_points", Count, 4096.0),
            ] },
            Experiment::EquivalencePair => const { &[
                ParamSpec::new("mass", Positive, 1.0),
                ParamSpec::new("temperature", Positive, 2.0),
                ParamSpec::new("target_variance", Positive, 1.0),
                ParamSpec::new("noise", Positive, 0.5),
                ParamSpec::new("reading", Real, 0.5),
                ParamSpec::new("grid_points", Count, 4096.0),
            ] },
            Experiment::CollisionGrid => const { &[
                ParamSpec::new("a_mean", Real, 1.0),
                ParamSpec::new("a_variance", Positive, 0.5),
                ParamSpec::new("b_mean", Real, -1.0),
                ParamSpec::new("b_variance", Positive, 0.5),
                ParamSpec::new("eps_variance", NonNegative, 0.25),
                ParamSpec::new("half_width", Positive, 10.0),
                ParamSpec::new("points", Count, 1023.0),
                ParamSpec::new("write_joint", Flag, 0.0),
            ] },
            Experiment::CollisionGaussian => const { &[
                ParamSpec::new("a_q_mean", Real, 0.0),
                ParamSpec::new("a_p_mean", Real, 1.0),
                ParamSpec::new("a_q_variance", Positive, 0.5),
                ParamSpec::new("a_p_variance", Positive, 0.5),
                ParamSpec::new("b_q_mean", Real, 0.0),
                ParamSpec::new("b_p_mean", Real, -1.0),
                ParamSpec::new("b_q_variance", Positive, 0.5),
                ParamSpec::new("b_p_variance", Positive, 0.5),
                ParamSpec::new("sweep_min", Positive, 1e-6),
                ParamSpec::new("sweep_max", Positive, 1e6),
                ParamSpec::new("sweep_points", Count, 25.0),
                ParamSpec::new("witness_p_variance", Positive, 0.05),
            ] },
            Experiment::OscillatorBinary => const { &[
                ParamSpec::new("nbar", NonNegative, 1.0),
                ParamSpec::new("lambda", Positive, 0.01),
                ParamSpec::new("dim", Count, 64.0),
            ] },
            Experiment::McValidate => const { &[
                ParamSpec::new("mass", Positive, 1.0),
                ParamSpec::new("temperature", Positive, 1.0),
                ParamSpec::new("coupling", Real, 1.0),
                ParamSpec::new("apparatus_variance", Positive, 1.0),
                ParamSpec::new("trials", Count, 1e6),
                ParamSpec::new("control_variance", Positive, 1e8),
                ParamSpec::new("write_trials", Flag, 0.0),
            ] },
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Real,
    Positive,
    NonNegative,
    /// Positive integer.
    Count,
    /// `true`/`false`, also accepted as `1`/`0`.
    Flag,
}

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    pub default: f64,
}

impl ParamSpec {
    const fn new(name: &'static str, kind: ParamKind, default: f64) -> Self {
        Self { name, kind, default }
    }

    fn validate(&self, raw: RawValue) -> Result<ParamValue, String> {
        let x = match raw {
            RawValue::Bool(b) if self.kind == ParamKind::Flag => return Ok(ParamValue::Flag(b)),
            RawValue::Bool(_) => return Err("expected a number, got a boolean".into()),
            RawValue::Number(x) => x,
        };
        if !x.is_finite() {
            return Err(format!("must be finite, got {x}"));
        }
        match self.kind {
            ParamKind::Real => Ok(ParamValue::Real(x)),
            ParamKind::Positive if x > 0.0 => Ok(ParamValue::Real(x)),
            ParamKind::Positive => Err(format!("must be positive, got {x}")),
            ParamKind::NonNegative if x >= 0.0 => Ok(ParamValue::Real(x)),
            ParamKind::NonNegative => Err(format!("must be non-negative, got {x}")),
            ParamKind::Count if x >= 1.0 && x.fract() == 0.0 && x <= u32::MAX as f64 * 16.0 => {
                Ok(ParamValue::Count(x as u64))
            }
            ParamKind::Count => Err(format!("must be a positive integer, got {x}")),
            ParamKind::Flag if x == 0.0 || x == 1.0 => Ok(ParamValue::Flag(x == 1.0)),
            ParamKind::Flag => Err(format!("must be true/false or 1/0, got {x}")),
        }
    }

    fn default_value(&self) -> ParamValue {
        match self.kind {
            ParamKind::Count => ParamValue::Count(self.default as u64),
            ParamKind::Flag => ParamValue::Flag(self.default != 0.0),
            _ => ParamValue::Real(self.default),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ParamValue {
    Real(f64),
    Count(u64),
    Flag(bool),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RawValue {
    Number(f64),
    Bool(bool),
}

impl RawValue {
    fn parse(text: &str) -> Option<Self> {
        match text.trim() {
            "true" => Some(RawValue::Bool(true)),
            "false" => Some(RawValue::Bool(false)),
            t => t.parse::<f64>().ok().map(RawValue::Number),
        }
    }
}

/// Parameters with their resolved values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params(BTreeMap<&'static str, ParamValue>);

impl Params {
    pub fn defaults(experiment: Experiment) -> Self {
        Self(experiment.schema().iter().map(|s| (s.name, s.default_value())).collect())
    }

    pub fn real(&self, name: &str) -> f64 {
        match self.0[name] {
            ParamValue::Real(x) => x,
            ParamValue::Count(n) => n as f64,
            ParamValue::Flag(b) => f64::from(u8::from(b)),
        }
    }

    pub fn count(&self, name: &str) -> usize {
        match self.0[name] {
            ParamValue::Count(n) => n as usize,
            other => panic!("parameter {name} is not a count: {other:?}"),
        }
    }

    pub fn flag(&self, name: &str) -> bool {
        match self.0[name] {
            ParamValue::Flag(b) => b,
            other => panic!("parameter {name} is not a flag: {other:?}"),
        }
    }

    fn set(&mut self, experiment: Experiment, name: &str, raw: RawValue) -> Result<(), ConfigError> {
        let spec = lookup(experiment, name)?;
        let value = spec.validate(raw).map_err(|reason| ConfigError::BadValue { name: name.to_string(), reason })?;
        self.0.insert(spec.name, value);
        Ok(())
    }
}

fn lookup(experiment: Experiment, name: &str) -> Result<&'static ParamSpec, ConfigError> {
    experiment.schema().iter().find(|s| s.name == name).ok_or_else(|| ConfigError::UnknownParameter {
        experiment,
        name: name.to_string(),
        known: experiment.schema().iter().map(|s| s.name).collect::<Vec<_>>().join(", "),
    })
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub params: Params,
}

/// Values read from a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    /// Only the section of the experiment being run.
    overrides: Vec<(String, RawValue)>,
}

impl FileConfig {
    pub fn load(path: &Path, experiment: Experiment) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text, &path.display().to_string(), experiment)
    }

    /// Parse config text; every section is validated against its schema,
    /// only the section for `experiment` is kept.
    pub fn parse(text: &str, path: &str, experiment: Experiment) -> Result<Self, ConfigError> {
        let syntax = |message: String| ConfigError::Syntax { path: path.to_string(), message };
        let table: toml::Table = toml::from_str(text).map_err(|e| syntax(e.to_string().trim_end().to_string()))?;
        let spans = toml::de::DeTable::parse(text).map_err(|e| syntax(e.to_string()))?;
        let field = |keys: &[&str], message: String| ConfigError::Field {
            path: path.to_string(),
            line: key_line(text, spans.get_ref(), keys),
            message,
        };

        let mut out = FileConfig::default();
        for (key, value) in &table {
            match (key.as_str(), value) {
                ("seed", toml::Value::Integer(n)) if *n >= 0 => out.seed = Some(*n as u64),
                ("seed", _) => return Err(field(&[key], "`seed` must be a non-negative integer".into())),
                ("output_dir", toml::Value::String(s)) => out.output_dir = Some(PathBuf::from(s)),
                ("output_dir", _) => return Err(field(&[key], "`output_dir` must be a string".into())),
                (name, toml::Value::Table(section)) => {
                    let Some(section_experiment) = Experiment::from_name(name) else {
                        return Err(field(&[key], format!("unknown section [{name}]")));
                    };
                    for (param, v) in section {
                        let raw = match v {
                            toml::Value::Integer(n) => RawValue::Number(*n as f64),
                            toml::Value::Float(x) => RawValue::Number(*x),
                            toml::Value::Boolean(b) => RawValue::Bool(*b),
                            _ => return Err(field(&[key, param], format!("`{param}` must be a number or boolean"))),
                        };
                        let mut scratch = Params::defaults(section_experiment);
                        scratch
                            .set(section_experiment, param, raw)
                            .map_err(|e| field(&[key, param], e.to_string()))?;
                        if section_experiment == experiment {
                            out.overrides.push((param.clone(), raw));
                        }
                    }
                }
                (name, _) => return Err(field(&[key], format!("unknown key `{name}`"))),
            }
        }
        Ok(out)
    }
}

fn key_line(text: &str, table: &toml::de::DeTable<'_>, keys: &[&str]) -> usize {
    let mut current = table;
    let mut offset = 0;
    for (depth, key) in keys.iter().enumerate() {
        let Some((k, v)) = current.iter().find(|(k, _)| k.get_ref().as_ref() == *key) else {
            break;
        };
        offset = k.span().start;
        match v.get_ref() {
            toml::de::DeValue::Table(t) if depth + 1 < keys.len() => current = t,
            _ => break,
        }
    }
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parse `key=value` from the command line.
pub fn parse_override(text: &str) -> Result<(String, String), ConfigError> {
    let (k, v) = text.split_once('=').ok_or_else(|| ConfigError::MalformedOverride(text.to_string()))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(ConfigError::MalformedOverride(text.to_string()));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

/// Merge defaults, file, environment and flags.
pub fn resolve(
    experiment: Experiment,
    file: Option<FileConfig>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    overrides: &[(String, String)],
    env_output_dir: Option<PathBuf>,
) -> Result<RunConfig, ConfigError> {
    let file = file.unwrap_or_default();
    let mut params = Params::defaults(experiment);
    for (name, raw) in &file.overrides {
        params.set(experiment, name, *raw)?;
    }
    for (name, text) in overrides {
        let raw = RawValue::parse(text).ok_or_else(|| ConfigError::BadValue {
            name: name.clone(),
            reason: format!("cannot parse `{text}` as a number or boolean"),
        })?;
        params.set(experiment, name, raw)?;
    }
    Ok(RunConfig {
        experiment,
        seed: seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        output_dir: out
            .or(file.output_dir)
            .or(env_output_dir)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        params,
    })
}
