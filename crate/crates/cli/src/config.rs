//! Run configuration: a flat `key = value` file merged under command-line
//! flags.
//!
//! ```toml
//! model = "harmonic"
//! lambda = 0.1
//! n = "6..30"
//! format = "csv"
//! ```

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use spt_core::{InteractionModel, SystemSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Ideal,
    Harmonic,
    /// Square well tuned to unitarity at range `r`.
    Unitary,
    /// Square well with explicit range `r` and depth parameter `b`.
    SquareWell,
}

impl ModelKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "ideal" | "non_interacting" => Some(Self::Ideal),
            "harmonic" | "harmonic_pair" => Some(Self::Harmonic),
            "unitary" => Some(Self::Unitary),
            "square_well" | "square-well" | "square_well_continued" => Some(Self::SquareWell),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Ideal => "ideal",
            Self::Harmonic => "harmonic",
            Self::Unitary => "unitary",
            Self::SquareWell => "square_well",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

/// Where a value came from, for error messages.
#[derive(Clone, Debug, PartialEq)]
enum Origin {
    File { path: PathBuf, line: usize },
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
            Origin::Flag => f.write_str("command line"),
        }
    }
}

#[derive(Debug, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Every field optional; one layer per source.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigLayer {
    pub model: Option<ModelKind>,
    pub lambda: Option<f64>,
    pub r: Option<f64>,
    pub b: Option<f64>,
    pub n: Option<String>,
    pub n_up: Option<usize>,
    pub n_down: Option<usize>,
    pub dimension: Option<u32>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub oracle_check: Option<bool>,
    pub verbose: Option<u8>,
    pub hw: Option<f64>,
    origins: HashMap<&'static str, Origin>,
}

const KEYS: [&str; 14] = [
    "model",
    "lambda",
    "r",
    "b",
    "n",
    "n_up",
    "n_down",
    "dimension",
    "format",
    "output",
    "cache_dir",
    "oracle_check",
    "verbose",
    "hw",
];

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line on which `key` is assigned; the parser does not keep spans for
/// table entries, so this scans for `key =` at the start of a line.
fn key_line(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            l.trim_start()
                .strip_prefix(key)
                .or_else(|| l.trim_start().strip_prefix(&format!("\"{key}\"")))
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map_or(0, |i| i + 1)
}

impl ConfigLayer {
    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e.span().map_or(0, |s| line_of(text, s.start));
            ConfigError(format!(
                "{}:{line}: {}",
                path.display(),
                e.message().trim_end()
            ))
        })?;
        let mut layer = ConfigLayer::default();
        for (key, value) in &table {
            let line = key_line(text, key);
            let at = |msg: String| {
                ConfigError(format!("{}:{line}: field `{key}`: {msg}", path.display()))
            };
            let Some(&k) = KEYS.iter().find(|k| **k == key.as_str()) else {
                return Err(at(format!(
                    "unknown field; expected one of {}",
                    KEYS.join(", ")
                )));
            };
            let float = || match value {
                toml::Value::Float(f) => Ok(*f),
                toml::Value::Integer(i) => Ok(*i as f64),
                other => Err(at(format!("expected a number, found {}", other.type_str()))),
            };
            let uint = || match value {
                toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
                other => Err(at(format!(
                    "expected a non-negative integer, found {other}"
                ))),
            };
            let string = || match value {
                toml::Value::String(s) => Ok(s.clone()),
                other => Err(at(format!("expected a string, found {}", other.type_str()))),
            };
            match k {
                "model" => {
                    let s = string()?;
                    layer.model = Some(ModelKind::parse(&s).ok_or_else(|| {
                        at(format!(
                            "unknown model `{s}` (ideal, harmonic, unitary, square_well)"
                        ))
                    })?);
                }
                "lambda" => layer.lambda = Some(float()?),
                "r" => layer.r = Some(float()?),
                "b" => layer.b = Some(float()?),
                "hw" => layer.hw = Some(float()?),
                "n" => {
                    layer.n = Some(match value {
                        toml::Value::Integer(i) if *i >= 0 => i.to_string(),
                        toml::Value::String(s) => s.clone(),
                        other => {
                            return Err(at(format!(
                                "expected an integer or range string, found {other}"
                            )))
                        }
                    })
                }
                "n_up" => layer.n_up = Some(uint()? as usize),
                "n_down" => layer.n_down = Some(uint()? as usize),
                "dimension" => {
                    layer.dimension =
                        Some(u32::try_from(uint()?).map_err(|_| at("dimension too large".into()))?)
                }
                "verbose" => layer.verbose = Some(u8::try_from(uint()?).unwrap_or(u8::MAX)),
                "format" => {
                    let s = string()?;
                    layer.format = Some(
                        Format::from_str(&s, true)
                            .map_err(|_| at(format!("unknown format `{s}` (text, csv, json)")))?,
                    );
                }
                "output" => layer.output = Some(PathBuf::from(string()?)),
                "cache_dir" => layer.cache_dir = Some(PathBuf::from(string()?)),
                "oracle_check" => match value {
                    toml::Value::Boolean(v) => layer.oracle_check = Some(*v),
                    other => return Err(at(format!("expected true or false, found {other}"))),
                },
                _ => unreachable!(),
            }
            layer.origins.insert(
                k,
                Origin::File {
                    path: path.to_path_buf(),
                    line,
                },
            );
        }
        Ok(layer)
    }

    /// Values set in `flags` win over `self`.
    pub fn overlay(mut self, flags: ConfigLayer) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if flags.$f.is_some() {
                    self.$f = flags.$f;
                    self.origins.insert(stringify!($f), Origin::Flag);
                }
            )*};
        }
        take!(
            model,
            lambda,
            r,
            b,
            n,
            n_up,
            n_down,
            dimension,
            format,
            output,
            cache_dir,
            oracle_check,
            verbose,
            hw
        );
        self
    }

    /// Supplies `r` when it is missing and the model is (or may be) unitary.
    pub fn with_default_range(mut self, r: f64) -> Self {
        if self.r.is_none()
            && matches!(self.model, None | Some(ModelKind::Unitary))
            && self.lambda.is_none()
        {
            self.r = Some(r);
        }
        self
    }

    fn origin(&self, key: &str) -> String {
        self.origins
            .get(key)
            .map_or_else(|| "command line".to_string(), |o| o.to_string())
    }

    fn field_error(&self, key: &str, msg: impl fmt::Display) -> ConfigError {
        ConfigError(format!("{}: field `{key}`: {msg}", self.origin(key)))
    }

    fn conflict(&self, a: &str, b: &str, msg: impl fmt::Display) -> ConfigError {
        ConfigError(format!(
            "conflicting fields `{a}` ({}) and `{b}` ({}): {msg}",
            self.origin(a),
            self.origin(b)
        ))
    }

    /// Model selection with conflicting or missing fields reported.
    fn model(&self) -> Result<Option<ModelKind>, ConfigError> {
        let present = |k: &str| match k {
            "lambda" => self.lambda.is_some(),
            "r" => self.r.is_some(),
            "b" => self.b.is_some(),
            _ => false,
        };
        let kind = match self.model {
            Some(k) => k,
            None => match (self.lambda.is_some(), self.r.is_some()) {
                (true, true) => {
                    return Err(self.conflict(
                        "lambda",
                        "r",
                        "a harmonic coupling and a well range select different models",
                    ))
                }
                (true, false) => ModelKind::Harmonic,
                (false, true) if self.b.is_some() => ModelKind::SquareWell,
                (false, true) => ModelKind::Unitary,
                (false, false) => return Ok(None),
            },
        };
        let (allowed, required): (&[&str], &[&str]) = match kind {
            ModelKind::Ideal => (&[], &[]),
            ModelKind::Harmonic => (&["lambda"], &["lambda"]),
            ModelKind::Unitary => (&["r"], &["r"]),
            ModelKind::SquareWell => (&["r", "b"], &["r", "b"]),
        };
        for k in ["lambda", "r", "b"] {
            if present(k) && !allowed.contains(&k) {
                return Err(self.conflict(
                    "model",
                    k,
                    format!("model `{}` takes no `{k}`", kind.name()),
                ));
            }
        }
        for k in required {
            if !present(k) {
                return Err(
                    self.field_error("model", format!("model `{}` needs `{k}`", kind.name()))
                );
            }
        }
        Ok(Some(kind))
    }

    /// Validated configuration.
    pub fn resolve(self) -> Result<RunConfig, ConfigError> {
        let kind = self.model()?;
        let particles = match (&self.n, self.n_up, self.n_down) {
            (Some(_), Some(_), _) => {
                return Err(self.conflict("n", "n_up", "give either `n` or `n_up`/`n_down`"))
            }
            (Some(_), None, Some(_)) => {
                return Err(self.conflict("n", "n_down", "give either `n` or `n_up`/`n_down`"))
            }
            (Some(s), None, None) => Some(Particles::Balanced(
                parse_n_list(s).map_err(|m| self.field_error("n", m))?,
            )),
            (None, Some(up), Some(down)) => Some(Particles::Split(up, down)),
            (None, Some(_), None) => {
                return Err(self.field_error("n_up", "`n_down` is also required"))
            }
            (None, None, Some(_)) => {
                return Err(self.field_error("n_down", "`n_up` is also required"))
            }
            (None, None, None) => None,
        };
        if let Some(hw) = self.hw {
            if !(hw > 0.0 && hw.is_finite()) {
                return Err(self.field_error("hw", format!("must be positive, got {hw}")));
            }
        }
        if let Some(d) = self.dimension {
            if d < 2 {
                return Err(self.field_error("dimension", format!("must be at least 2, got {d}")));
            }
        }
        let model =
            match kind {
                None => None,
                Some(ModelKind::Ideal) => Some(ModelSpec::Ideal),
                Some(ModelKind::Harmonic) => {
                    let lambda = self.lambda.expect("checked");
                    if !(lambda >= 0.0 && lambda.is_finite()) {
                        return Err(self
                            .field_error("lambda", format!("must be non-negative, got {lambda}")));
                    }
                    Some(ModelSpec::Harmonic(lambda))
                }
                Some(ModelKind::Unitary) => Some(ModelSpec::Unitary(self.range()?)),
                Some(ModelKind::SquareWell) => {
                    let b = self.b.expect("checked");
                    if !(b > 1.0 && b.is_finite()) {
                        return Err(self
                            .field_error("b", format!("depth parameter must exceed 1, got {b}")));
                    }
                    Some(ModelSpec::SquareWell {
                        r: self.range()?,
                        b,
                    })
                }
            };
        Ok(RunConfig {
            model,
            particles,
            dimension: self.dimension.unwrap_or(3),
            format: self.format.unwrap_or_default(),
            output: self.output,
            cache_dir: self.cache_dir,
            oracle_check: self.oracle_check.unwrap_or(false),
            verbose: self.verbose.unwrap_or(0),
            hw: self.hw,
        })
    }

    fn range(&self) -> Result<f64, ConfigError> {
        let r = self.r.expect("checked");
        if !(r > 0.0 && r.is_finite()) {
            return Err(self.field_error("r", format!("range must be positive, got {r}")));
        }
        Ok(r)
    }
}

/// Parses `6`, `6..30` (inclusive), `6..=30` or `4,6,8`.
pub fn parse_n_list(s: &str) -> Result<Vec<usize>, String> {
    let s = s.trim();
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("`{t}` is not a particle number"))
    };
    let out: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let (lo, hi) = (num(a)?, num(b.strip_prefix('=').unwrap_or(b))?);
        if lo > hi {
            return Err(format!("empty range `{s}`"));
        }
        (lo..=hi).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if let Some(&n) = out.iter().find(|&&n| n < 2) {
        return Err(format!("N = {n} is below the minimum of 2"));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    Ideal,
    Harmonic(f64),
    Unitary(f64),
    SquareWell { r: f64, b: f64 },
}

impl ModelSpec {
    pub fn build(&self) -> spt_core::Result<InteractionModel> {
        Ok(match *self {
            ModelSpec::Ideal => InteractionModel::NonInteracting,
            ModelSpec::Harmonic(coupling) => InteractionModel::HarmonicPair { coupling },
            ModelSpec::Unitary(r) => InteractionModel::unitary(r)?,
            ModelSpec::SquareWell { r, b } => InteractionModel::SquareWellContinued {
                range: r,
                depth_parameter: b,
            },
        })
    }

    pub fn range(&self) -> Option<f64> {
        match *self {
            ModelSpec::Unitary(r) | ModelSpec::SquareWell { r, .. } => Some(r),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Particles {
    Balanced(Vec<usize>),
    Split(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: Option<ModelSpec>,
    pub particles: Option<Particles>,
    pub dimension: u32,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub oracle_check: bool,
    pub verbose: u8,
    pub hw: Option<f64>,
}

impl RunConfig {
    pub fn model(&self) -> Result<&ModelSpec, ConfigError> {
        self.model.as_ref().ok_or_else(|| {
            ConfigError("no model given (use --model or `model =` in the config)".into())
        })
    }

    /// Specs for every requested particle number.
    pub fn specs(&self, interaction: &InteractionModel) -> Result<Vec<SystemSpec>, ConfigError> {
        let with_dim = |mut s: SystemSpec| {
            s.dimension_target = self.dimension;
            s
        };
        match &self.particles {
            None => Err(ConfigError(
                "no particle number given (use --n or --n-up/--n-down)".into(),
            )),
            Some(Particles::Split(up, down)) => Ok(vec![with_dim(SystemSpec::new(
                *up,
                *down,
                interaction.clone(),
            ))]),
            Some(Particles::Balanced(ns)) => Ok(ns
                .iter()
                .map(|&n| with_dim(SystemSpec::balanced(n, interaction.clone())))
                .collect()),
        }
    }

    /// The single spec of a one-`N` command.
    pub fn single_spec(&self, interaction: &InteractionModel) -> Result<SystemSpec, ConfigError> {
        let mut specs = self.specs(interaction)?;
        if specs.len() != 1 {
            return Err(ConfigError(format!(
                "this command takes one particle number, got {}",
                specs.len()
            )));
        }
        Ok(specs.remove(0))
    }

    /// Multiplier from `ħω_ho` to output units.
    pub fn energy_scale(&self) -> f64 {
        self.hw.unwrap_or(1.0)
    }

    pub fn energy_unit(&self) -> &'static str {
        if self.hw.is_some() {
            "hw-scaled"
        } else {
            "ħω_ho"
        }
    }
}

impl ConfigLayer {
    /// Layer built from command-line flags.
    #[allow(clippy::too_many_arguments)]
    pub fn flags(
        model: Option<ModelKind>,
        lambda: Option<f64>,
        r: Option<f64>,
        b: Option<f64>,
        n: Option<String>,
        n_up: Option<usize>,
        n_down: Option<usize>,
        dimension: Option<u32>,
        format: Option<Format>,
        output: Option<PathBuf>,
        cache_dir: Option<PathBuf>,
        oracle_check: bool,
        verbose: u8,
        hw: Option<f64>,
    ) -> Self {
        ConfigLayer {
            model,
            lambda,
            r,
            b,
            n,
            n_up,
            n_down,
            dimension,
            format,
            output,
            cache_dir,
            oracle_check: oracle_check.then_some(true),
            verbose: (verbose > 0).then_some(verbose),
            hw,
            origins: HashMap::new(),
        }
    }
}
