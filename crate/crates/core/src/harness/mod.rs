//! Experiment runner: Monte Carlo sweeps over horizons, metric aggregation,
//! log-log slope fits, property suites and a binomial sanity check.
//!
//! Trial `i` of every horizon uses the generators from
//! [`trial_rngs(seed, i)`](crate::simulation::trial_rngs), so horizons share
//! random streams and results do not depend on thread scheduling.

mod config;
pub mod generators;
mod stats;
mod suites;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentSpec, OutputFormat};
pub use stats::{fit_loglog, fit_loglog_with_stderr, format_g, summarize, SlopeFit, Summary};
pub use suites::{default_cases, property_suite, property_suite_with, SuiteOptions, SuiteReport, SUITES};

use crate::error::{CalibError, Result};
use crate::exec::{map_indexed, Execution};
use crate::forecasting::forecaster_from_spec;
use crate::metrics::{caldist_exact, ece, smce};
use crate::simulation::{adversary_from_spec, run_game, GameConfig};
use crate::transport::{caldist_upper_bound_with_k, default_grid_k, lower_caldist_grid, ConsolidationMode};
use crate::types::Transcript;
use crate::walkgame::{play_walk, walk_strategy_from_spec, WalkTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricSpec {
    Ece,
    Smce,
    CaldistExact,
    /// Grid size `K`; `None` uses `max(1000, 10·T)`.
    LowerCaldist(Option<usize>),
    CaldistUpper(ConsolidationMode),
}

impl MetricSpec {
    pub fn evaluate(&self, tr: &Transcript, oracle_cap: usize) -> Result<f64> {
        let k = |g: Option<usize>| g.unwrap_or_else(|| default_grid_k(tr.len()));
        Ok(match *self {
            MetricSpec::Ece => ece(tr),
            MetricSpec::Smce => smce(tr)?.value,
            MetricSpec::CaldistExact => caldist_exact(tr, oracle_cap)?.value,
            MetricSpec::LowerCaldist(g) => lower_caldist_grid(tr, k(g))?.value,
            MetricSpec::CaldistUpper(mode) => caldist_upper_bound_with_k(tr, mode, k(None))?.value,
        })
    }
}

impl FromStr for MetricSpec {
    type Err = CalibError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let unknown = || CalibError::UnknownName {
            kind: "metric",
            name: s.to_string(),
        };
        Ok(match s.split_once(':') {
            None => match s {
                "ece" => Self::Ece,
                "smce" => Self::Smce,
                "caldist-exact" => Self::CaldistExact,
                "lower-caldist" => Self::LowerCaldist(None),
                "caldist-upper" => Self::CaldistUpper(ConsolidationMode::General),
                _ => return Err(unknown()),
            },
            Some(("lower-caldist", k)) => {
                let k: usize = k
                    .parse()
                    .map_err(|_| CalibError::InvalidParameter(format!("grid size `{k}` in `{s}`")))?;
                if k < 2 {
                    return Err(CalibError::InvalidParameter(format!("grid size must be at least 2 in `{s}`")));
                }
                Self::LowerCaldist(Some(k))
            }
            Some(("caldist-upper", mode)) => Self::CaldistUpper(mode.parse()?),
            Some(_) => return Err(unknown()),
        })
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ece => f.write_str("ece"),
            Self::Smce => f.write_str("smce"),
            Self::CaldistExact => f.write_str("caldist-exact"),
            Self::LowerCaldist(None) => f.write_str("lower-caldist"),
            Self::LowerCaldist(Some(k)) => write!(f, "lower-caldist:{k}"),
            Self::CaldistUpper(ConsolidationMode::General) => f.write_str("caldist-upper:general"),
            Self::CaldistUpper(ConsolidationMode::Sparse) => f.write_str("caldist-upper:sparse"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub metric: String,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub experiment: String,
    pub rows: Vec<ReportRow>,
    /// One fit per metric when the sweep has at least three distinct
    /// horizons and every mean is positive.
    pub fits: Vec<SlopeFit>,
}

pub const CSV_HEADER: &str = "experiment,T,metric,trials,mean,stderr";

impl ScalingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.experiment,
                r.horizon,
                r.metric,
                r.trials,
                format_g(r.mean, 12),
                format_g(r.stderr, 12)
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    pub fn write(&self, path: &Path, format: OutputFormat) -> Result<()> {
        std::fs::write(path, self.render(format)).map_err(|e| CalibError::Io(format!("{}: {e}", path.display())))
    }

    pub fn row(&self, horizon: usize, metric: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.horizon == horizon && r.metric == metric)
    }

    pub fn fit(&self, metric: &str) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.metric == metric)
    }
}

/// Plays `trials` games at one horizon and maps each transcript through `f`.
/// Results are in trial order.
pub fn game_trials<R, F>(
    horizon: usize,
    forecaster: &str,
    adversary: &str,
    seed: u64,
    trials: usize,
    exec: Execution,
    f: F,
) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(&Transcript) -> Result<R> + Sync + Send,
{
    forecaster_from_spec(forecaster, horizon)?;
    adversary_from_spec(adversary, horizon)?;
    map_indexed(trials, exec, |i| {
        let tr = run_game(&GameConfig {
            horizon,
            forecaster: forecaster.to_string(),
            adversary: adversary.to_string(),
            seed,
            trial: i as u64,
        })?;
        f(&tr)
    })
    .into_iter()
    .collect()
}

/// Plays `trials` walks; walk `i` draws noise from ChaCha8 stream `i`.
pub fn walk_trials<R, F>(
    strategy: &str,
    horizon: usize,
    seed: u64,
    trials: usize,
    exec: Execution,
    f: F,
) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(&WalkTrajectory) -> R + Sync + Send,
{
    walk_strategy_from_spec(strategy, horizon)?;
    map_indexed(trials, exec, |i| {
        let mut s = walk_strategy_from_spec(strategy, horizon)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        Ok(f(&play_walk(s.as_mut(), horizon, &mut rng)?))
    })
    .into_iter()
    .collect()
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ScalingReport> {
    run_experiment_with(spec, Execution::best_available())
}

/// Runs the sweep and, when the spec names an output path, writes the report
/// there in the spec's format.
pub fn run_experiment_with(spec: &ExperimentSpec, exec: Execution) -> Result<ScalingReport> {
    spec.validate()?;
    let mut rows = Vec::new();
    for &horizon in &spec.horizons {
        let per_trial = game_trials(
            horizon,
            &spec.forecaster,
            &spec.adversary,
            spec.seed,
            spec.trials,
            exec,
            |tr| {
                spec.metrics
                    .iter()
                    .map(|m| m.evaluate(tr, spec.oracle_cap))
                    .collect::<Result<Vec<f64>>>()
            },
        )?;
        for (j, metric) in spec.metrics.iter().enumerate() {
            let samples: Vec<f64> = per_trial.iter().map(|v| v[j]).collect();
            let s = summarize(&samples);
            rows.push(ReportRow {
                horizon,
                metric: metric.to_string(),
                trials: s.n,
                mean: s.mean,
                stderr: s.stderr,
            });
        }
    }
    let fits = spec
        .metrics
        .iter()
        .filter_map(|m| {
            let label = m.to_string();
            let points: Vec<(f64, f64, f64)> = rows
                .iter()
                .filter(|r| r.metric == label)
                .map(|r| (r.horizon as f64, r.mean, r.stderr))
                .collect();
            fit_loglog_with_stderr(&label, &points).ok()
        })
        .collect();
    let report = ScalingReport {
        experiment: spec.name.clone(),
        rows,
        fits,
    };
    if let Some(path) = &spec.output {
        report.write(path, spec.format)?;
    }
    Ok(report)
}

pub const ANTICONCENTRATION_THRESHOLD: f64 = 0.74;

/// Monte Carlo estimate of `P(|X − n/2| ≥ √n/10)` for `X ~ Bin(n, 1/2)`,
/// and whether it reaches 0.74.
pub fn binomial_anticoncentration_check(n: usize, samples: usize, rng: &mut dyn RngCore) -> Result<(f64, bool)> {
    binomial_anticoncentration_with_threshold(n, samples, ANTICONCENTRATION_THRESHOLD, rng)
}

pub fn binomial_anticoncentration_with_threshold(
    n: usize,
    samples: usize,
    threshold: f64,
    rng: &mut dyn RngCore,
) -> Result<(f64, bool)> {
    if n == 0 || samples == 0 {
        return Err(CalibError::InvalidParameter(format!(
            "need n ≥ 1 and samples ≥ 1, got n={n}, samples={samples}"
        )));
    }
    // |X − n/2| ≥ √n/10  ⇔  |2X − n| ≥ √n/5
    let radius = (n as f64).sqrt() / 5.0;
    let (words, rest) = (n / 64, n % 64);
    let mut hits = 0usize;
    for _ in 0..samples {
        let mut ones: u64 = (0..words).map(|_| u64::from(rng.next_u64().count_ones())).sum();
        if rest > 0 {
            ones += u64::from((rng.next_u64() & ((1u64 << rest) - 1)).count_ones());
        }
        if (2.0 * ones as f64 - n as f64).abs() >= radius {
            hits += 1;
        }
    }
    let freq = hits as f64 / samples as f64;
    Ok((freq, freq >= threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_names_round_trip() {
        for s in [
            "ece",
            "smce",
            "caldist-exact",
            "lower-caldist",
            "lower-caldist:500",
            "caldist-upper:general",
            "caldist-upper:sparse",
        ] {
            assert_eq!(s.parse::<MetricSpec>().unwrap().to_string(), s);
        }
        assert!("lower-caldist:1".parse::<MetricSpec>().is_err());
        assert!(matches!("brier".parse::<MetricSpec>(), Err(CalibError::UnknownName { .. })));
    }

    #[test]
    fn binomial_trivial_and_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(binomial_anticoncentration_check(1, 1000, &mut rng).unwrap(), (1.0, true));
        let (f, ok) = binomial_anticoncentration_check(4096, 20_000, &mut rng).unwrap();
        assert!(ok && f > 0.8 && f < 0.88, "{f}");
        let (_, ok) = binomial_anticoncentration_with_threshold(4096, 20_000, 0.99, &mut rng).unwrap();
        assert!(!ok);
        assert!(binomial_anticoncentration_check(0, 10, &mut rng).is_err());
    }

    #[test]
    fn single_trial_matches_direct_metric() {
        let spec = ExperimentSpec {
            horizons: vec![6],
            trials: 1,
            forecaster: "constant-half".into(),
            adversary: "fixed:110100".into(),
            metrics: vec![MetricSpec::Ece],
            ..ExperimentSpec::default()
        };
        let report = run_experiment(&spec).unwrap();
        let tr = Transcript::new(vec![1, 1, 0, 1, 0, 0], vec![0.5; 6]).unwrap();
        assert_eq!(report.rows[0].mean, ece(&tr));
        assert_eq!(report.rows[0].stderr, 0.0);
        assert!(report.fits.is_empty());
    }

    #[test]
    fn sweep_fits_and_is_schedule_independent() {
        let spec = ExperimentSpec {
            horizons: vec![100, 400, 1600],
            trials: 16,
            forecaster: "fixed-bias:auto".into(),
            adversary: "bernoulli:0.5".into(),
            metrics: vec![MetricSpec::Smce, MetricSpec::Ece],
            ..ExperimentSpec::default()
        };
        let a = run_experiment_with(&spec, Execution::Sequential).unwrap();
        let b = run_experiment_with(&spec, Execution::Parallel).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.fits.len(), 2);
        assert!(a.to_csv().starts_with("experiment,T,metric,trials,mean,stderr\n"));
        assert_eq!(a.to_csv().lines().count(), 1 + 6);
    }

    #[test]
    fn walk_trials_deterministic() {
        let a = walk_trials("zero", 50, 3, 8, Execution::Sequential, |w| w.cost).unwrap();
        let b = walk_trials("zero", 50, 3, 8, Execution::Parallel, |w| w.cost).unwrap();
        assert_eq!(a, b);
        assert!(walk_trials("fly", 50, 3, 8, Execution::Sequential, |w| w.cost).is_err());
    }
}
