//! Experiment configuration: a versioned TOML document.
//!
//! Loading is strict. Every key of the schema must be present (except the
//! few marked optional), unknown keys are rejected, and every range
//! violation is reported with its dotted key path.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::experiment::mdp::ViOptions;
use crate::rl::{LearningParams, LevelScheme, RewardParams};
use crate::simcore::{ActionMask, ModelParams, PerQueue};

pub const SCHEMA_VERSION: u32 = 1;

/// Keys that may be omitted; they fall back to their defaults.
const OPTIONAL_KEYS: &[&str] = &["model.direct_decode_on_accept", "reward.relay_penalty_link"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Cooperative,
    NonCooperative,
}

impl Mode {
    pub fn mask(self) -> ActionMask {
        match self {
            Mode::Cooperative => ActionMask::FULL,
            Mode::NonCooperative => ActionMask::NON_COOPERATIVE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Cooperative => "cooperative",
            Mode::NonCooperative => "non-cooperative",
        }
    }

    pub fn index(self) -> u64 {
        match self {
            Mode::Cooperative => 0,
            Mode::NonCooperative => 1,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cooperative" => Ok(Mode::Cooperative),
            "non-cooperative" => Ok(Mode::NonCooperative),
            other => Err(format!("unknown mode `{other}` (expected cooperative or non-cooperative)")),
        }
    }
}

/// Single-run settings used by `train` and `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub train_horizon: u64,
    pub eval_horizon: u64,
    pub base_seed: u64,
}

/// The primary-load sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Values of `lambda_p = beta_p`.
    pub lambda_p: Vec<f64>,
    pub omegas: Vec<f64>,
    pub modes: Vec<Mode>,
    pub replications: u32,
}

/// Shrunk instance for the value-iteration oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Capacity used for every queue.
    pub capacity: u32,
    pub levels: LevelScheme,
    pub lambda_p: f64,
    pub omega: f64,
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub max_states: u64,
    pub train_horizon: u64,
    pub eval_slots: u64,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelParams,
    pub reward: RewardParams,
    pub levels: LevelScheme,
    pub learning: LearningParams,
    pub run: RunConfig,
    pub sweep: SweepConfig,
    pub oracle: OracleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelParams::default(),
            reward: RewardParams::default(),
            levels: LevelScheme::default(),
            learning: LearningParams::default(),
            run: RunConfig { mode: Mode::Cooperative, train_horizon: 300_000, eval_horizon: 100_000, base_seed: 2015 },
            sweep: SweepConfig {
                lambda_p: interior_grid(9),
                omegas: vec![0.2, 0.5, 0.8],
                modes: vec![Mode::Cooperative, Mode::NonCooperative],
                replications: 5,
            },
            oracle: OracleConfig {
                capacity: 2,
                levels: LevelScheme::binary(),
                lambda_p: 0.5,
                omega: 0.5,
                tolerance: 1e-9,
                max_sweeps: 100_000,
                max_states: 1_000_000,
                train_horizon: 1_000_000,
                eval_slots: 1_000_000,
                seeds: vec![1, 2, 3],
            },
        }
    }
}

/// `n` evenly spaced points strictly inside (0, 1): `k / (n + 1)`.
pub fn interior_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|k| round6(k as f64 / (n + 1) as f64)).collect()
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// One problem found while loading a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Dotted key path, empty for document-level problems.
    pub path: String,
    pub message: String,
    /// 1-based line and column for syntax errors.
    pub position: Option<(usize, usize)>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some((line, col)) = self.position {
            write!(f, "line {line}, column {col}: ")?;
        }
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl Diagnostic {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into(), position: None }
    }
}

/// Why a configuration could not be loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    /// Not valid TOML.
    Syntax(Diagnostic),
    /// Well-formed but missing keys, unknown keys, or out-of-range values.
    Invalid(Vec<Diagnostic>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax(d) => write!(f, "syntax error: {d}"),
            ConfigError::Invalid(ds) => {
                write!(f, "{} problem(s):", ds.len())?;
                for d in ds {
                    write!(f, "\n  {d}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let position = e.span().map(|span| line_col(text, span.start));
            ConfigError::Syntax(Diagnostic { path: String::new(), message: e.message().trim().to_string(), position })
        })?;

        let reference = toml::Table::try_from(ExperimentConfig::default()).expect("default config serializes");
        let mut problems = Vec::new();
        compare_keys(&reference, &doc, "", &mut problems);
        if !problems.is_empty() {
            return Err(ConfigError::Invalid(problems));
        }

        let config: ExperimentConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Invalid(vec![Diagnostic::at("", e.message().trim())]))?;
        let problems = config.validate();
        if problems.is_empty() {
            Ok(config)
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every violated invariant, with key paths.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            d.push(Diagnostic::at(
                "schema_version",
                format!("unsupported schema version {} (this build reads {SCHEMA_VERSION})", self.schema_version),
            ));
        }

        let caps = &self.model.capacity;
        for (name, c) in [("p", caps.p), ("pe", caps.pe), ("s", caps.s), ("ps", caps.ps), ("se", caps.se)] {
            if c < 1 {
                d.push(Diagnostic::at(format!("model.capacity.{name}"), "capacity must be at least 1"));
            }
        }
        let a = &self.model.arrivals;
        for (name, m) in [("p", a.p), ("pe", a.pe), ("s", a.s), ("se", a.se)] {
            prob(&mut d, &format!("model.arrivals.{name}.lambda"), m.lambda);
            prob(&mut d, &format!("model.arrivals.{name}.beta"), m.beta);
        }
        let c = &self.model.channels;
        for (name, ch) in [("p", c.p), ("s", c.s), ("ps", c.ps), ("sp", c.sp)] {
            prob(&mut d, &format!("model.channels.{name}.gamma"), ch.gamma);
            prob(&mut d, &format!("model.channels.{name}.q"), ch.q);
        }

        prob(&mut d, "reward.omega", self.reward.omega);
        if !(self.reward.penalty_k >= 0.0 && self.reward.penalty_k.is_finite()) {
            d.push(Diagnostic::at("reward.penalty_k", "penalty must be finite and non-negative"));
        }

        for (name, cap) in [("s", caps.s), ("ps", caps.ps), ("se", caps.se)] {
            if let Err(e) = self.levels.check_capacity(cap) {
                d.push(Diagnostic::at("levels.thresholds", format!("{e} (queue {name})")));
            }
        }

        let l = &self.learning;
        if !(l.alpha > 0.0 && l.alpha <= 1.0) {
            d.push(Diagnostic::at("learning.alpha", "learning rate must be in (0, 1]"));
        }
        if !(0.0..1.0).contains(&l.gamma) {
            d.push(Diagnostic::at(
                "learning.gamma",
                "discount must be < 1 to ensure convergence of the sum (and >= 0)",
            ));
        }
        prob(&mut d, "learning.mu", l.mu);
        prob(&mut d, "learning.explore_fraction", l.explore_fraction);
        if l.curve_window < 1 {
            d.push(Diagnostic::at("learning.curve_window", "must be at least 1"));
        }

        if self.run.train_horizon < 1 {
            d.push(Diagnostic::at("run.train_horizon", "horizon must be at least 1"));
        }
        if self.run.eval_horizon < 1 {
            d.push(Diagnostic::at("run.eval_horizon", "horizon must be at least 1"));
        }

        let s = &self.sweep;
        if s.lambda_p.is_empty() {
            d.push(Diagnostic::at("sweep.lambda_p", "grid must not be empty"));
        }
        for (i, &x) in s.lambda_p.iter().enumerate() {
            prob(&mut d, &format!("sweep.lambda_p[{i}]"), x);
        }
        if s.omegas.is_empty() {
            d.push(Diagnostic::at("sweep.omegas", "must list at least one weight"));
        }
        for (i, &x) in s.omegas.iter().enumerate() {
            prob(&mut d, &format!("sweep.omegas[{i}]"), x);
        }
        if s.modes.is_empty() {
            d.push(Diagnostic::at("sweep.modes", "must list at least one mode"));
        }
        if s.replications < 1 {
            d.push(Diagnostic::at("sweep.replications", "replications must be at least 1"));
        }

        let o = &self.oracle;
        if o.capacity < 1 {
            d.push(Diagnostic::at("oracle.capacity", "capacity must be at least 1"));
        } else if let Err(e) = o.levels.check_capacity(o.capacity) {
            d.push(Diagnostic::at("oracle.levels.thresholds", e.to_string()));
        }
        prob(&mut d, "oracle.lambda_p", o.lambda_p);
        prob(&mut d, "oracle.omega", o.omega);
        if !(o.tolerance > 0.0 && o.tolerance.is_finite()) {
            d.push(Diagnostic::at("oracle.tolerance", "tolerance must be positive"));
        }
        if o.max_sweeps < 1 {
            d.push(Diagnostic::at("oracle.max_sweeps", "must be at least 1"));
        }
        if o.train_horizon < 1 {
            d.push(Diagnostic::at("oracle.train_horizon", "horizon must be at least 1"));
        }
        if o.eval_slots < 1 {
            d.push(Diagnostic::at("oracle.eval_slots", "must be at least 1"));
        }
        if o.seeds.is_empty() {
            d.push(Diagnostic::at("oracle.seeds", "must list at least one seed"));
        }
        d
    }

    /// Model and reward of the shrunk oracle instance.
    pub fn oracle_model(&self) -> (ModelParams, RewardParams) {
        let c = self.oracle.capacity;
        let mut model = self.model.clone().with_primary_load(self.oracle.lambda_p);
        model.capacity = PerQueue { p: c, pe: c, s: c, ps: c, se: c };
        let reward = RewardParams { omega: self.oracle.omega, ..self.reward };
        (model, reward)
    }

    pub fn oracle_vi_options(&self) -> ViOptions {
        ViOptions { tolerance: self.oracle.tolerance, max_sweeps: self.oracle.max_sweeps, initial_value: 0.0 }
    }
}

fn prob(d: &mut Vec<Diagnostic>, path: &str, x: f64) {
    if !(0.0..=1.0).contains(&x) {
        d.push(Diagnostic::at(path, format!("{x} is not a probability in [0, 1]")));
    }
}

fn compare_keys(reference: &toml::Table, doc: &toml::Table, prefix: &str, out: &mut Vec<Diagnostic>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    for (key, ref_value) in reference {
        let path = join(key);
        match doc.get(key) {
            None if OPTIONAL_KEYS.contains(&path.as_str()) => {}
            None => out.push(Diagnostic::at(path, "missing key")),
            Some(value) => {
                if let (toml::Value::Table(r), toml::Value::Table(v)) = (ref_value, value) {
                    compare_keys(r, v, &path, out);
                }
            }
        }
    }
    for key in doc.keys() {
        if !reference.contains_key(key) && !OPTIONAL_KEYS.contains(&join(key).as_str()) {
            out.push(Diagnostic::at(join(key), "unknown key"));
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}
