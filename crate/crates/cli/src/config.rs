//! Resolved experiment configuration: defaults, then the config file, then flags.

use std::path::Path;

use serde::{Deserialize, Serialize};

use deepgeom::grid::linspace;
use deepgeom::activations::builtin;
use deepgeom::{EnsembleParams, Quadrature};

use crate::UsageError;

/// Every key a command may use. Only keys relevant to the command are kept
/// after resolution, so the header lists exactly what shaped the output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<String>,
    /// `resolved` or `hermite:<order>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Comma-separated depth list.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depths: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_theta: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<u64>,
    /// `lo:hi:count`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sw: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sb: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    /// Comma-separated criterion ids for `validate-all`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criteria: Option<String>,
}

macro_rules! merge_fields {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        Config { $($f: $hi.$f.clone().or_else(|| $lo.$f.clone()),)* }
    };
}

impl Config {
    /// Fields of `self` win over those of `base`.
    pub fn over(&self, base: &Config) -> Config {
        merge_fields!(
            self, base, tool, command, sigma_w, sigma_b, nonlinearity, quadrature, width, depth, depths, q0, c0,
            n_theta, seed, seeds, sw, sb, deltas, omega_max, ridge, trials, points, max_iters, criteria
        )
    }

    /// Names of the keys that are set.
    pub fn keys(&self) -> Vec<String> {
        match toml::Value::try_from(self) {
            Ok(toml::Value::Table(t)) => t.keys().cloned().collect(),
            _ => Vec::new(),
        }
    }

    /// Keeps only `keys` (plus `command`/`tool`), rejecting any other key
    /// that was set explicitly.
    pub fn restrict(self, command: &str, keys: &[&str]) -> Result<Config, UsageError> {
        if let Some(c) = &self.command {
            if c != command {
                return Err(UsageError(format!("config was written for `{c}`, not `{command}`")));
            }
        }
        for k in self.keys() {
            if k != "command" && k != "tool" && !keys.contains(&k.as_str()) {
                return Err(UsageError(format!("`{k}` is not used by `{command}`")));
            }
        }
        Ok(self)
    }

    pub fn to_toml_lines(&self) -> Vec<String> {
        toml::to_string(self)
            .expect("config serializes")
            .lines()
            .map(str::to_string)
            .collect()
    }
}

/// Reads a config from TOML or JSON. Output files of this tool are accepted
/// too: for CSV the leading `#` comment block is parsed, for JSON the
/// `config` member.
pub fn load(path: &Path) -> Result<Config, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
        let inner = match v.get("config") {
            Some(c) if v.get("columns").is_some() => c.clone(),
            _ => v,
        };
        return serde_json::from_value(inner).map_err(|e| UsageError(format!("config {}: {e}", path.display())));
    }
    let body: String = if trimmed.starts_with('#') {
        text.lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.strip_prefix("# ").or_else(|| l.strip_prefix('#')).unwrap_or(l))
            .collect::<Vec<_>>()
            .join("\n")
    } else {
        text.clone()
    };
    toml::from_str(&body).map_err(|e| UsageError(format!("config {}: {e}", path.display())))
}

/// Parses `lo:hi:count` into `count` evenly spaced values.
pub fn parse_range(field: &str, s: &str) -> Result<Vec<f64>, UsageError> {
    let bad = || UsageError(format!("`{field}` must be lo:hi:count, got `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(bad());
    }
    Ok(linspace(lo, hi, count))
}

pub fn parse_list<T: std::str::FromStr>(field: &str, s: &str) -> Result<Vec<T>, UsageError> {
    let out: Result<Vec<T>, _> = s.split(',').map(|p| p.trim().parse::<T>()).collect();
    match out {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(UsageError(format!("`{field}` must be a comma-separated list, got `{s}`"))),
    }
}

pub fn parse_quadrature(s: &str) -> Result<Quadrature, UsageError> {
    if s == "resolved" {
        return Ok(Quadrature::default());
    }
    let order = s
        .strip_prefix("hermite:")
        .and_then(|o| o.parse::<usize>().ok())
        .ok_or_else(|| UsageError(format!("`quadrature` must be `resolved` or `hermite:<order>`, got `{s}`")))?;
    Quadrature::hermite(order).map_err(|e| UsageError(format!("`quadrature`: {e}")))
}

/// Accessors for resolved values. Resolution guarantees presence.
impl Config {
    pub fn params(&self) -> Result<EnsembleParams, UsageError> {
        let phi = builtin(self.nonlinearity.as_deref().unwrap_or("tanh"))
            .map_err(|e| UsageError(format!("`nonlinearity`: {e}")))?;
        EnsembleParams::new(self.f("sigma_w", self.sigma_w)?, self.f("sigma_b", self.sigma_b)?, phi)
            .map_err(|e| UsageError(format!("ensemble parameters: {e}")))
    }

    pub fn quad(&self) -> Result<Quadrature, UsageError> {
        parse_quadrature(self.quadrature.as_deref().unwrap_or("resolved"))
    }

    pub fn f(&self, name: &str, v: Option<f64>) -> Result<f64, UsageError> {
        v.ok_or_else(|| UsageError(format!("`{name}` is required")))
    }

    pub fn n<T: Copy>(&self, name: &str, v: Option<T>) -> Result<T, UsageError> {
        v.ok_or_else(|| UsageError(format!("`{name}` is required")))
    }

    pub fn s<'a>(&self, name: &str, v: &'a Option<String>) -> Result<&'a str, UsageError> {
        v.as_deref().ok_or_else(|| UsageError(format!("`{name}` is required")))
    }
}

/// Positive-count and range checks shared by commands.
pub fn require(cond: bool, field: &str, what: &str) -> Result<(), UsageError> {
    if cond {
        Ok(())
    } else {
        Err(UsageError(format!("`{field}` {what}")))
    }
}
