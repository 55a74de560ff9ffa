use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation over `√n`; zero for a single sample.
    pub stderr: f64,
    pub n: usize,
}

/// Two-pass mean and standard error, folded in slice order.
pub fn summarize(samples: &[f64]) -> Summary {
    let n = samples.len();
    if n == 0 {
        return Summary {
            mean: f64::NAN,
            stderr: f64::NAN,
            n,
        };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Summary { mean, stderr, n }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub metric: String,
    pub slope: f64,
    pub intercept: f64,
    /// Sum of squared residuals in log space.
    pub residual: f64,
    pub points: usize,
    /// Standard error of the slope propagated from per-point standard
    /// errors, when those are known.
    pub slope_stderr: Option<f64>,
}

/// Least-squares fit of `ln y = intercept + slope·ln T`.
pub fn fit_loglog(metric: &str, points: &[(f64, f64)]) -> Result<SlopeFit> {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Err(CalibError::InvalidParameter(format!(
            "slope fit for {metric} needs at least 3 distinct T values, got {}",
            xs.len()
        )));
    }
    if let Some(bad) = points.iter().find(|(t, y)| !(*t > 0.0 && *y > 0.0)) {
        return Err(CalibError::InvalidParameter(format!(
            "slope fit for {metric} needs positive values, got ({}, {})",
            bad.0, bad.1
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(t, y)| (t.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok(SlopeFit {
        metric: metric.to_string(),
        slope,
        intercept,
        residual,
        points: logs.len(),
        slope_stderr: None,
    })
}

/// [`fit_loglog`] on `(T, mean, stderr)` triples. The slope's standard error
/// uses the delta method, `Var(ln ȳ) ≈ (se/ȳ)²`, with independent points.
pub fn fit_loglog_with_stderr(metric: &str, points: &[(f64, f64, f64)]) -> Result<SlopeFit> {
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.0, p.1)).collect();
    let mut fit = fit_loglog(metric, &pairs)?;
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0.ln()).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
    let var: f64 = points
        .iter()
        .map(|&(t, y, se)| ((t.ln() - mx) / sxx).powi(2) * (se / y).powi(2))
        .sum();
    fit.slope_stderr = Some(var.sqrt());
    Ok(fit)
}

/// `printf("%.*g")`: `sig` significant digits, trailing zeros removed.
pub fn format_g(v: f64, sig: usize) -> String {
    let sig = sig.max(1);
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", sig - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
