//! Online forecasters. Each call sees only the completed steps; strategy state
//! catches up lazily on history entries it has not consumed yet.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::types::{sgn, Step};

pub trait Forecaster: Send {
    /// Prediction for step `history.len() + 1`.
    fn predict(&mut self, history: &[Step], rng: &mut dyn RngCore) -> f64;
}

#[derive(Debug, Clone)]
pub struct Constant {
    value: f64,
}

impl Constant {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(CalibError::InvalidParameter(format!(
                "constant prediction {value} outside [0, 1]"
            )));
        }
        Ok(Self { value })
    }
}

impl Forecaster for Constant {
    fn predict(&mut self, _history: &[Step], _rng: &mut dyn RngCore) -> f64 {
        self.value
    }
}

/// Predicts `1/2 + ε·sgn(S)` with `S` the running bias.
#[derive(Debug, Clone)]
pub struct FixedBias {
    eps: f64,
    bias: f64,
    seen: usize,
}

impl FixedBias {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 0.5) {
            return Err(CalibError::InvalidParameter(format!(
                "fixed-bias epsilon must lie in (0, 1/2], got {eps}"
            )));
        }
        Ok(Self {
            eps,
            bias: 0.0,
            seen: 0,
        })
    }

    /// `ε = T^{-1/3}`, capped at 1/2.
    pub fn for_horizon(horizon: usize) -> Self {
        Self::new((horizon.max(1) as f64).powf(-1.0 / 3.0).min(0.5)).expect("valid epsilon")
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn running_bias(&self) -> f64 {
        self.bias
    }
}

impl Forecaster for FixedBias {
    fn predict(&mut self, history: &[Step], _rng: &mut dyn RngCore) -> f64 {
        for s in &history[self.seen..] {
            self.bias += s.bias();
        }
        self.seen = history.len();
        0.5 + self.eps * sgn(self.bias)
    }
}

/// Round bookkeeping exposed for inspection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub start: usize,
    pub length: usize,
    pub eps: Option<f64>,
}

/// Halving-round forecaster. Each round predicts 1/2 for the first half of
/// the remaining horizon, then leans against the observed bias until the
/// round's cumulative bias returns to `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct AdaptiveBias {
    horizon: usize,
    seen: usize,
    round_bias: f64,
    rounds: Vec<Round>,
}

impl AdaptiveBias {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            seen: 0,
            round_bias: 0.0,
            rounds: vec![Round {
                start: 0,
                length: horizon,
                eps: None,
            }],
        }
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    fn current(&self) -> Round {
        *self.rounds.last().expect("at least one round")
    }

    fn drift_start(r: &Round) -> usize {
        r.start + r.length / 2
    }

    fn observe(&mut self, index: usize, step: &Step) {
        self.round_bias += step.bias();
        let r = self.current();
        if index >= Self::drift_start(&r) && (-1.0..=1.0).contains(&self.round_bias) {
            let start = index + 1;
            if start < self.horizon {
                self.rounds.push(Round {
                    start,
                    length: self.horizon - start,
                    eps: None,
                });
            }
            self.round_bias = 0.0;
        }
    }
}

/// `sgn(Δ)·min(2|Δ|/L + √(ln L / L), 1/2)`.
pub fn adaptive_eps(delta: f64, length: usize) -> f64 {
    let l = length.max(1) as f64;
    sgn(delta) * (2.0 * delta.abs() / l + (l.ln() / l).sqrt()).min(0.5)
}

impl Forecaster for AdaptiveBias {
    fn predict(&mut self, history: &[Step], _rng: &mut dyn RngCore) -> f64 {
        for (i, step) in history.iter().enumerate().skip(self.seen) {
            self.observe(i, step);
        }
        self.seen = history.len();
        let t = history.len();
        let r = self.current();
        if t < Self::drift_start(&r) {
            return 0.5;
        }
        let eps = match r.eps {
            Some(e) => e,
            None => {
                let e = adaptive_eps(self.round_bias, r.length);
                self.rounds.last_mut().expect("round").eps = Some(e);
                e
            }
        };
        (0.5 + eps).clamp(0.0, 1.0)
    }
}

/// Builds a forecaster from a registry name:
/// `constant:<v>`, `constant-half`, `fixed-bias:<ε|auto>`, `adaptive-bias`.
pub fn forecaster_from_spec(spec: &str, horizon: usize) -> Result<Box<dyn Forecaster>> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (spec.trim(), None),
    };
    let bad = || CalibError::UnknownName {
        kind: "forecaster",
        name: spec.to_string(),
    };
    let number = |a: &str| {
        a.parse::<f64>()
            .map_err(|_| CalibError::InvalidParameter(format!("`{a}` is not a number in `{spec}`")))
    };
    Ok(match (name, arg) {
        ("constant-half", None) => Box::new(Constant::new(0.5)?),
        ("constant", Some(a)) => Box::new(Constant::new(number(a)?)?),
        ("fixed-bias", Some("auto")) => Box::new(FixedBias::for_horizon(horizon)),
        ("fixed-bias", Some(a)) => Box::new(FixedBias::new(number(a)?)?),
        ("adaptive-bias", None) => Box::new(AdaptiveBias::new(horizon)),
        _ => return Err(bad()),
    })
}
