//! Experiment configuration.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! line    := blank | comment | key ws? '=' ws? value
//! comment := '#' anything            (also allowed after a value)
//! key     := name | T | trials | seed | forecaster | adversary
//!          | metrics | out | format | oracle_cap
//! ```
//!
//! `T` and `metrics` take comma-separated lists. Horizons may be written as
//! integers, `1e5` or `2^12`. Keys may appear at most once.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MetricSpec;
use crate::error::{CalibError, Result};
use crate::forecasting::forecaster_from_spec;
use crate::metrics::DEFAULT_ORACLE_CAP;
use crate::simulation::adversary_from_spec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = CalibError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(CalibError::UnknownName {
                kind: "output format",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub horizons: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub forecaster: String,
    pub adversary: String,
    pub metrics: Vec<MetricSpec>,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub oracle_cap: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            horizons: vec![1000],
            trials: 100,
            seed: 0,
            forecaster: "constant-half".into(),
            adversary: "bernoulli:0.5".into(),
            metrics: vec![MetricSpec::Smce],
            output: None,
            format: OutputFormat::Csv,
            oracle_cap: DEFAULT_ORACLE_CAP,
        }
    }
}

/// Parses `1000`, `1e5` or `2^12`.
pub fn parse_horizon(s: &str) -> Result<usize> {
    let s = s.trim();
    let bad = || CalibError::InvalidParameter(format!("`{s}` is not a positive integer horizon"));
    if let Some((b, e)) = s.split_once('^') {
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        let e: u32 = e.trim().parse().map_err(|_| bad())?;
        return b.checked_pow(e).ok_or_else(bad);
    }
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| bad())?;
    if v.fract() == 0.0 && v >= 0.0 && v < 2f64.powi(53) {
        Ok(v as usize)
    } else {
        Err(bad())
    }
}

fn parse_list<T>(value: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(item)
        .collect()
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or_default().trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| CalibError::Parse {
                line,
                message: "expected `key = value`".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(CalibError::Parse {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
            seen.push(key.to_string());
            spec.set(key, value).map_err(|e| CalibError::Parse {
                line,
                message: e.to_string(),
            })?;
        }
        Ok(spec)
    }

    /// Sets one field from its textual form. Used by the parser and by
    /// command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let number = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| CalibError::InvalidParameter(format!("`{v}` is not a non-negative integer for `{key}`")))
        };
        match key {
            "name" => self.name = value.to_string(),
            "T" => self.horizons = parse_list(value, parse_horizon)?,
            "trials" => self.trials = number(value)? as usize,
            "seed" => self.seed = number(value)?,
            "forecaster" => self.forecaster = value.to_string(),
            "adversary" => self.adversary = value.to_string(),
            "metrics" => self.metrics = parse_list(value, MetricSpec::from_str)?,
            "out" => self.output = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "oracle_cap" => self.oracle_cap = number(value)? as usize,
            _ => {
                return Err(CalibError::UnknownName {
                    kind: "config key",
                    name: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains([',', '\n', '"']) {
            return Err(CalibError::InvalidParameter(format!(
                "experiment name `{}` must be non-empty without commas, quotes or newlines",
                self.name
            )));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(CalibError::InvalidParameter("horizons must be a non-empty list of positive integers".into()));
        }
        if self.trials == 0 {
            return Err(CalibError::InvalidParameter("trials must be at least 1".into()));
        }
        if self.metrics.is_empty() {
            return Err(CalibError::InvalidParameter("at least one metric is required".into()));
        }
        let max_t = *self.horizons.iter().max().expect("non-empty");
        if self.metrics.contains(&MetricSpec::CaldistExact) && max_t > self.oracle_cap {
            return Err(CalibError::TooLarge {
                horizon: max_t,
                cap: self.oracle_cap,
            });
        }
        for &t in &self.horizons {
            forecaster_from_spec(&self.forecaster, t)?;
            adversary_from_spec(&self.adversary, t)?;
        }
        Ok(())
    }
}
