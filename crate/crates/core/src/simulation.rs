//! Adversaries and the forecaster-vs-adversary game loop.
//!
//! Randomness: every game owns two ChaCha8 streams derived from the master
//! seed, stream `2·trial` for the forecaster and `2·trial + 1` for the
//! adversary. Trials are therefore independent of execution order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::forecasting::{forecaster_from_spec, Forecaster};
use crate::types::{Step, Transcript};

pub trait Adversary: Send {
    /// Outcome for step `history.len() + 1`; never sees the current prediction.
    fn next_bit(&mut self, history: &[Step], rng: &mut dyn RngCore) -> u8;
}

#[derive(Debug, Clone)]
pub struct Bernoulli {
    q: f64,
}

impl Bernoulli {
    pub fn new(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(CalibError::InvalidParameter(format!(
                "bernoulli parameter {q} outside [0, 1]"
            )));
        }
        Ok(Self { q })
    }
}

impl Adversary for Bernoulli {
    fn next_bit(&mut self, _history: &[Step], rng: &mut dyn RngCore) -> u8 {
        u8::from(rng.gen_bool(self.q))
    }
}

#[derive(Debug, Clone)]
pub struct FixedBits {
    bits: Vec<u8>,
}

impl FixedBits {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        crate::types::validate_outcomes(&bits)?;
        Ok(Self { bits })
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(CalibError::InvalidParameter(format!(
                    "bitstring `{s}` contains `{c}`"
                ))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(bits)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

impl Adversary for FixedBits {
    fn next_bit(&mut self, history: &[Step], _rng: &mut dyn RngCore) -> u8 {
        self.bits[history.len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Oblivious,
    Adaptive,
}

/// Fair bits on both branches until, on the adaptive branch, the running
/// bias reaches `c·T^{1/3}` in absolute value; from then on a constant bit
/// that freezes the bias (1 if it is positive, else 0).
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    threshold: f64,
    adaptive_weight: f64,
    branch: Option<Branch>,
    bias: f64,
    seen: usize,
    frozen: Option<(usize, u8)>,
}

impl EarlyStopping {
    pub fn new(c: f64, horizon: usize) -> Result<Self> {
        Self::with_weight(c, 0.5, horizon)
    }

    pub fn with_weight(c: f64, adaptive_weight: f64, horizon: usize) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(CalibError::InvalidParameter(format!(
                "early-stop constant must be positive, got {c}"
            )));
        }
        if !(0.0..=1.0).contains(&adaptive_weight) {
            return Err(CalibError::InvalidParameter(format!(
                "adaptive weight {adaptive_weight} outside [0, 1]"
            )));
        }
        Ok(Self {
            threshold: c * (horizon as f64).cbrt(),
            adaptive_weight,
            branch: None,
            bias: 0.0,
            seen: 0,
            frozen: None,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn branch(&self) -> Option<Branch> {
        self.branch
    }

    /// Step index (0-based) from which the constant suffix starts, and its bit.
    pub fn trigger(&self) -> Option<(usize, u8)> {
        self.frozen
    }
}

impl Adversary for EarlyStopping {
    fn next_bit(&mut self, history: &[Step], rng: &mut dyn RngCore) -> u8 {
        let branch = *self.branch.get_or_insert_with(|| {
            if rng.gen_bool(self.adaptive_weight) {
                Branch::Adaptive
            } else {
                Branch::Oblivious
            }
        });
        for s in &history[self.seen..] {
            self.bias += s.bias();
        }
        self.seen = history.len();
        if branch == Branch::Adaptive && self.frozen.is_none() && self.bias.abs() >= self.threshold {
            self.frozen = Some((history.len(), u8::from(self.bias > 0.0)));
        }
        match self.frozen {
            Some((_, bit)) => bit,
            None => u8::from(rng.gen_bool(0.5)),
        }
    }
}

/// Builds an adversary from `bernoulli:<q>`, `fixed:<bits>`,
/// `early-stop:<c>` or `early-stop:<c>:<adaptive weight>`.
pub fn adversary_from_spec(spec: &str, horizon: usize) -> Result<Box<dyn Adversary>> {
    let mut parts = spec.trim().split(':');
    let name = parts.next().unwrap_or_default();
    let args: Vec<&str> = parts.collect();
    let number = |a: &str| {
        a.trim()
            .parse::<f64>()
            .map_err(|_| CalibError::InvalidParameter(format!("`{a}` is not a number in `{spec}`")))
    };
    Ok(match (name, args.as_slice()) {
        ("bernoulli", [q]) => Box::new(Bernoulli::new(number(q)?)?),
        ("fixed", [bits]) => {
            let f = FixedBits::parse(bits.trim())?;
            if f.len() < horizon {
                return Err(CalibError::InvalidParameter(format!(
                    "fixed bitstring has {} bits but the horizon is {horizon}",
                    f.len()
                )));
            }
            Box::new(f)
        }
        ("early-stop", [c]) => Box::new(EarlyStopping::new(number(c)?, horizon)?),
        ("early-stop", [c, w]) => {
            Box::new(EarlyStopping::with_weight(number(c)?, number(w)?, horizon)?)
        }
        _ => {
            return Err(CalibError::UnknownName {
                kind: "adversary",
                name: spec.to_string(),
            })
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub horizon: usize,
    pub forecaster: String,
    pub adversary: String,
    pub seed: u64,
    pub trial: u64,
}

/// The forecaster's and adversary's generators for one trial.
pub fn trial_rngs(seed: u64, trial: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut f = ChaCha8Rng::seed_from_u64(seed);
    f.set_stream(2 * trial);
    let mut a = ChaCha8Rng::seed_from_u64(seed);
    a.set_stream(2 * trial + 1);
    (f, a)
}

pub fn run_game(cfg: &GameConfig) -> Result<Transcript> {
    if cfg.horizon == 0 {
        return Err(CalibError::Empty);
    }
    let mut forecaster = forecaster_from_spec(&cfg.forecaster, cfg.horizon)?;
    let mut adversary = adversary_from_spec(&cfg.adversary, cfg.horizon)?;
    let (mut rf, mut ra) = trial_rngs(cfg.seed, cfg.trial);
    play(cfg.horizon, forecaster.as_mut(), adversary.as_mut(), &mut rf, &mut ra)
}

/// Plays `horizon` rounds. Both moves for step `t` are computed from the
/// first `t − 1` steps before either is revealed.
pub fn play(
    horizon: usize,
    forecaster: &mut dyn Forecaster,
    adversary: &mut dyn Adversary,
    forecaster_rng: &mut dyn RngCore,
    adversary_rng: &mut dyn RngCore,
) -> Result<Transcript> {
    let mut history: Vec<Step> = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let prediction = forecaster.predict(&history, forecaster_rng);
        let outcome = adversary.next_bit(&history, adversary_rng);
        history.push(Step { outcome, prediction });
    }
    Transcript::from_steps(&history)
}
