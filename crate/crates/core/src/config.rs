//! Run configuration: a flat, line-oriented `key = value` format.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! line    := blank | comment | key '=' value [comment]
//! comment := '#' any*
//! key     := [a-z_][a-z0-9_]*
//! value   := number | boolean | identifier | '1e-2h2' | value (',' value)*
//! ```
//!
//! Numbers use decimal or scientific notation. Booleans are `true`/`false`.
//! `1e-2h2` is accepted only for `eps_dissipation` and means `1e-2 * h_x^2`.
//! Keys may appear at most once; unknown keys are rejected.
//!
//! Recognized keys: `scenario`, `rank`, `tau`, `t_final` (required);
//! `n_x`, `n_v1`, `n_v2`, `correction`, `eps_dissipation`, `cadence`,
//! `snapshot_times`, `output_dir`, `seed`, `n_substeps`, `rk_scheme`, plus the
//! physical parameters of the chosen scenario (`alpha`, `k`, `v_max`, ...).

use std::fmt::{self, Write as _};
use std::path::PathBuf;

use thiserror::Error;

use crate::rk::{RkScheme, SubstepConfig};
use crate::scenarios::{ScenarioError, ScenarioKind, ScenarioSpec};

/// Symbolic dissipation token.
pub const GRID_SCALED_TOKEN: &str = "1e-2h2";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dissipation {
    Fixed(f64),
    /// `1e-2 * h_x^2`.
    GridScaled,
}

impl Dissipation {
    pub fn resolve(self, h_x: f64) -> f64 {
        match self {
            Dissipation::Fixed(eps) => eps,
            Dissipation::GridScaled => 1e-2 * h_x * h_x,
        }
    }
}

impl fmt::Display for Dissipation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dissipation::Fixed(eps) => write!(f, "{eps:?}"),
            Dissipation::GridScaled => f.write_str(GRID_SCALED_TOKEN),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    pub tau: f64,
    pub t_final: f64,
    pub correction: bool,
    pub eps_dissipation: Dissipation,
    /// Diagnostics are recorded every `cadence` steps and at the final step.
    pub cadence: usize,
    pub snapshot_times: Vec<f64>,
    pub output_dir: PathBuf,
    pub substeps: SubstepConfig,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}, column {column}: `{key}`: {message}")]
    BadValue {
        line: usize,
        column: usize,
        key: String,
        message: String,
    },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("`{key}`: {message}")]
    Invalid { key: &'static str, message: String },
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
}

const RUN_KEYS: &[&str] = &[
    "scenario",
    "rank",
    "tau",
    "t_final",
    "n_x",
    "n_v1",
    "n_v2",
    "correction",
    "eps_dissipation",
    "cadence",
    "snapshot_times",
    "output_dir",
    "seed",
    "n_substeps",
    "rk_scheme",
];

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
    /// 1-based column of the first value character.
    column: usize,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

fn tokenize(text: &str) -> Result<Vec<Entry<'_>>, ConfigError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            let column = content.len() - content.trim_start().len() + 1;
            return Err(ConfigError::Syntax {
                line,
                column,
                message: "expected `key = value`".into(),
            });
        };
        let key = content[..eq].trim();
        if !is_identifier(key) {
            let column = content.len() - content.trim_start().len() + 1;
            return Err(ConfigError::Syntax {
                line,
                column,
                message: format!("invalid key `{key}`"),
            });
        }
        let rest = &content[eq + 1..];
        let value = rest.trim();
        let column = eq + 2 + (rest.len() - rest.trim_start().len());
        if value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                column,
                message: format!("missing value for `{key}`"),
            });
        }
        if entries.iter().any(|e| e.key == key) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        entries.push(Entry {
            line,
            key,
            value,
            column,
        });
    }
    Ok(entries)
}

impl Entry<'_> {
    fn bad(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::BadValue {
            line: self.line,
            column: self.column,
            key: self.key.to_string(),
            message: message.into(),
        }
    }

    fn real(&self) -> Result<f64, ConfigError> {
        parse_real(self.value).ok_or_else(|| self.bad(format!("expected a finite number, got `{}`", self.value)))
    }

    fn integer(&self) -> Result<u64, ConfigError> {
        self.value
            .parse::<u64>()
            .map_err(|_| self.bad(format!("expected a non-negative integer, got `{}`", self.value)))
    }

    fn boolean(&self) -> Result<bool, ConfigError> {
        match self.value {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(self.bad(format!("expected `true` or `false`, got `{other}`"))),
        }
    }

    fn reals(&self) -> Result<Vec<f64>, ConfigError> {
        self.value
            .split(',')
            .map(|item| {
                parse_real(item.trim()).ok_or_else(|| self.bad(format!("expected a number in list, got `{}`", item.trim())))
            })
            .collect()
    }
}

fn parse_real(token: &str) -> Option<f64> {
    let plausible = !token.is_empty()
        && token
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'));
    if !plausible {
        return None;
    }
    token.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let entries = tokenize(text)?;
    let find = |key: &str| entries.iter().find(|e| e.key == key);

    let scenario_entry = find("scenario").ok_or(ConfigError::Missing("scenario"))?;
    let kind = ScenarioKind::from_name(scenario_entry.value).ok_or_else(|| {
        let names: Vec<_> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
        scenario_entry.bad(format!("unknown scenario `{}`; expected one of {}", scenario_entry.value, names.join(", ")))
    })?;
    for e in &entries {
        let physical = kind.default_params().iter().any(|(n, _)| *n == e.key);
        if !RUN_KEYS.contains(&e.key) && !physical {
            return Err(ConfigError::UnknownKey {
                line: e.line,
                key: e.key.to_string(),
            });
        }
    }

    let required_real = |key: &'static str| -> Result<f64, ConfigError> { find(key).ok_or(ConfigError::Missing(key))?.real() };
    let size = |key: &str, default: usize| -> Result<usize, ConfigError> {
        match find(key) {
            Some(e) => Ok(e.integer()? as usize),
            None => Ok(default),
        }
    };

    let rank = find("rank").ok_or(ConfigError::Missing("rank"))?.integer()? as usize;
    let (dx, dv1, dv2) = kind.default_grid();
    let mut scenario = ScenarioSpec::new(kind, rank).with_grid(size("n_x", dx)?, size("n_v1", dv1)?, size("n_v2", dv2)?);
    for e in &entries {
        if kind.default_params().iter().any(|(n, _)| *n == e.key) {
            scenario.set_param(e.key, e.real()?).map_err(|err| e.bad(err.to_string()))?;
        }
    }
    if let Some(e) = find("seed") {
        scenario.seed = e.integer()?;
    }

    let eps_dissipation = match find("eps_dissipation") {
        None => Dissipation::Fixed(0.0),
        Some(e) if e.value == GRID_SCALED_TOKEN => Dissipation::GridScaled,
        Some(e) => {
            let eps = e.real()?;
            if eps < 0.0 {
                return Err(e.bad("must be >= 0"));
            }
            Dissipation::Fixed(eps)
        }
    };

    let mut substeps = SubstepConfig::default();
    if let Some(e) = find("n_substeps") {
        substeps.n_substeps = e.integer()? as usize;
    }
    if let Some(e) = find("rk_scheme") {
        substeps.scheme = RkScheme::from_name(e.value).ok_or_else(|| e.bad("expected `rk4` or `dopri5`"))?;
    }

    let config = RunConfig {
        scenario,
        tau: required_real("tau")?,
        t_final: required_real("t_final")?,
        correction: find("correction").map(Entry::boolean).transpose()?.unwrap_or(false),
        eps_dissipation,
        cadence: size("cadence", 1)?,
        snapshot_times: find("snapshot_times").map(Entry::reals).transpose()?.unwrap_or_default(),
        output_dir: find("output_dir").map_or_else(|| PathBuf::from("out"), |e| PathBuf::from(e.value)),
        substeps,
    };
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    /// Checks every cross-field rule, including grid and rank admissibility.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key, message: &str| {
            Err(ConfigError::Invalid {
                key,
                message: message.to_string(),
            })
        };
        if !(self.tau > 0.0) {
            return invalid("tau", "must be > 0");
        }
        if !(self.t_final >= self.tau) {
            return invalid("t_final", "must be >= tau");
        }
        if self.cadence < 1 {
            return invalid("cadence", "must be >= 1");
        }
        if self.substeps.n_substeps < 1 {
            return invalid("n_substeps", "must be >= 1");
        }
        if let Dissipation::Fixed(eps) = self.eps_dissipation {
            if !(eps >= 0.0 && eps.is_finite()) {
                return invalid("eps_dissipation", "must be finite and >= 0");
            }
        }
        if self.snapshot_times.iter().any(|t| !(0.0..=self.t_final).contains(t)) {
            return invalid("snapshot_times", "every time must lie in [0, t_final]");
        }
        self.scenario.grid().map_err(ScenarioError::from)?;
        let min = self.scenario.kind.intrinsic_rank();
        if self.scenario.rank < min {
            return Err(ScenarioError::RankTooSmall {
                kind: self.scenario.kind,
                rank: self.scenario.rank,
                min,
            }
            .into());
        }
        let n_x = self.scenario.n_x;
        if self.scenario.rank > n_x {
            return Err(ScenarioError::RankTooLarge {
                rank: self.scenario.rank,
                max: n_x,
                axis: "x",
            }
            .into());
        }
        Ok(())
    }

    /// Number of steps; `t_final` is rounded up to a whole number of steps.
    pub fn n_steps(&self) -> usize {
        let ratio = self.t_final / self.tau;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest as usize
        } else {
            ratio.ceil() as usize
        }
    }

    /// Canonical text form; `parse_config(emit())` reproduces `self`.
    pub fn emit(&self) -> String {
        let sc = &self.scenario;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("scenario", sc.kind.name().to_string());
        line("rank", sc.rank.to_string());
        line("n_x", sc.n_x.to_string());
        line("n_v1", sc.n_v1.to_string());
        line("n_v2", sc.n_v2.to_string());
        for (name, value) in sc.params() {
            line(name, format!("{value:?}"));
        }
        line("seed", sc.seed.to_string());
        line("tau", format!("{:?}", self.tau));
        line("t_final", format!("{:?}", self.t_final));
        line("correction", self.correction.to_string());
        line("eps_dissipation", self.eps_dissipation.to_string());
        line("cadence", self.cadence.to_string());
        if !self.snapshot_times.is_empty() {
            let times: Vec<String> = self.snapshot_times.iter().map(|t| format!("{t:?}")).collect();
            line("snapshot_times", times.join(", "));
        }
        line("output_dir", self.output_dir.display().to_string());
        line("n_substeps", self.substeps.n_substeps.to_string());
        line("rk_scheme", self.substeps.scheme.name().to_string());
        out
    }
}
