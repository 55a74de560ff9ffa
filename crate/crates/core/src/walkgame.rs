//! Controlled random walk: the player moves by `ε_t ∈ [-1/2, 1/2]`, fair
//! `±1/2` noise follows, and the cost is `|X_T| + Σ ε_t²`.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::types::sgn;

pub trait WalkStrategy: Send {
    /// Move for step `t` (1-based) given `X_{t−1}`.
    fn next_move(&mut self, t: usize, position: f64) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkTrajectory {
    /// `X_0 … X_T`.
    pub positions: Vec<f64>,
    pub moves: Vec<f64>,
    pub noises: Vec<f64>,
    pub cost: f64,
}

impl WalkTrajectory {
    pub fn final_position(&self) -> f64 {
        *self.positions.last().expect("X_0 is always present")
    }

    pub fn drift_cost(&self) -> f64 {
        self.moves.iter().map(|e| e * e).sum()
    }
}

pub fn play_walk(strategy: &mut dyn WalkStrategy, horizon: usize, rng: &mut dyn RngCore) -> Result<WalkTrajectory> {
    play_walk_with_noise(strategy, horizon, |_| if rng.gen_bool(0.5) { 0.5 } else { -0.5 })
}

/// Same as [`play_walk`] with caller-supplied noise; `noise(t)` is drawn after
/// the strategy has committed to `ε_t`.
pub fn play_walk_with_noise(
    strategy: &mut dyn WalkStrategy,
    horizon: usize,
    mut noise: impl FnMut(usize) -> f64,
) -> Result<WalkTrajectory> {
    if horizon == 0 {
        return Err(CalibError::Empty);
    }
    let mut positions = Vec::with_capacity(horizon + 1);
    let mut moves = Vec::with_capacity(horizon);
    let mut noises = Vec::with_capacity(horizon);
    let mut x = 0.0;
    positions.push(x);
    for t in 1..=horizon {
        let e = strategy.next_move(t, x);
        if e.is_nan() || e.abs() > 0.5 {
            return Err(CalibError::IllegalMove { step: t, value: e });
        }
        let d = noise(t);
        x += e + d;
        moves.push(e);
        noises.push(d);
        positions.push(x);
    }
    let cost = x.abs() + moves.iter().map(|e| e * e).sum::<f64>();
    Ok(WalkTrajectory {
        positions,
        moves,
        noises,
        cost,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDrift;

impl WalkStrategy for ZeroDrift {
    fn next_move(&mut self, _t: usize, _position: f64) -> f64 {
        0.0
    }
}

/// `ε_t = −ε·sgn(X_{t−1})`.
#[derive(Debug, Clone, Copy)]
pub struct FixedDrift {
    eps: f64,
}

impl FixedDrift {
    pub fn new(eps: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&eps) {
            return Err(CalibError::InvalidParameter(format!(
                "drift {eps} outside [0, 1/2]"
            )));
        }
        Ok(Self { eps })
    }

    pub fn for_horizon(horizon: usize) -> Self {
        Self {
            eps: (horizon.max(1) as f64).powf(-1.0 / 3.0).min(0.5),
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

impl WalkStrategy for FixedDrift {
    fn next_move(&mut self, _t: usize, position: f64) -> f64 {
        -self.eps * sgn(position)
    }
}

/// Epochs on the remaining horizon `L`: `⌊L/2⌋` free steps, then a push of
/// size `α/√L` toward the origin (`α = α_scale·√(ln L)`) until the walk
/// changes sign or comes within 1 of the origin.
#[derive(Debug, Clone)]
pub struct EpochDrift {
    alpha_scale: f64,
    horizon: usize,
    /// 1-based step at which the current epoch began.
    epoch_start: usize,
    epoch_len: usize,
    /// Sign of X at the start of the drift phase, once it has begun.
    anchor: Option<f64>,
    epochs: usize,
}

impl EpochDrift {
    pub fn new(alpha_scale: f64, horizon: usize) -> Result<Self> {
        if !(alpha_scale >= 0.0 && alpha_scale.is_finite()) {
            return Err(CalibError::InvalidParameter(format!(
                "alpha scale must be non-negative, got {alpha_scale}"
            )));
        }
        Ok(Self {
            alpha_scale,
            horizon,
            epoch_start: 1,
            epoch_len: horizon,
            anchor: None,
            epochs: 1,
        })
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    fn restart(&mut self, t: usize) {
        self.epoch_start = t;
        self.epoch_len = self.horizon + 1 - t;
        self.anchor = None;
        self.epochs += 1;
    }
}

impl WalkStrategy for EpochDrift {
    fn next_move(&mut self, t: usize, position: f64) -> f64 {
        let free_end = self.epoch_start + self.epoch_len / 2;
        if t < free_end {
            return 0.0;
        }
        match self.anchor {
            None => self.anchor = Some(sgn(position)),
            Some(a) => {
                if sgn(position) != a || position.abs() <= 1.0 {
                    self.restart(t);
                    return self.next_move(t, position);
                }
            }
        }
        let a = self.anchor.expect("anchor set above");
        if a == 0.0 || position.abs() <= 1.0 {
            if self.epoch_len >= 2 {
                self.restart(t);
                return self.next_move(t, position);
            }
            return 0.0;
        }
        let l = self.epoch_len as f64;
        let alpha = self.alpha_scale * l.ln().sqrt();
        -a * (alpha / l.sqrt()).min(0.5)
    }
}

/// `zero`, `fixed-drift:<ε|auto>`, `epoch-drift:<α_scale>`.
pub fn walk_strategy_from_spec(spec: &str, horizon: usize) -> Result<Box<dyn WalkStrategy>> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (spec.trim(), None),
    };
    let number = |a: &str| {
        a.parse::<f64>()
            .map_err(|_| CalibError::InvalidParameter(format!("`{a}` is not a number in `{spec}`")))
    };
    Ok(match (name, arg) {
        ("zero", None) => Box::new(ZeroDrift),
        ("fixed-drift", Some("auto")) => Box::new(FixedDrift::for_horizon(horizon)),
        ("fixed-drift", Some(a)) => Box::new(FixedDrift::new(number(a)?)?),
        ("epoch-drift", Some(a)) => Box::new(EpochDrift::new(number(a)?, horizon)?),
        _ => {
            return Err(CalibError::UnknownName {
                kind: "walk strategy",
                name: spec.to_string(),
            })
        }
    })
}
