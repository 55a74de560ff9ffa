//! Random instances for the property suites.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::types::{TransportPlan, Transcript};

/// A transcript with `1 ≤ T ≤ max_t` and at most `max_distinct` prediction
/// values. Values come from a coarse grid half of the time so that ties and
/// grid-aligned cases are common; outcomes are drawn either fair or from the
/// prediction itself.
pub fn random_transcript<R: Rng + ?Sized>(rng: &mut R, max_t: usize, max_distinct: usize) -> Transcript {
    let horizon = rng.gen_range(1..=max_t.max(1));
    let distinct = rng.gen_range(1..=max_distinct.clamp(1, horizon));
    let grid = rng.gen_bool(0.5);
    let palette: Vec<f64> = (0..distinct)
        .map(|_| {
            if grid {
                f64::from(rng.gen_range(0..=20u32)) / 20.0
            } else {
                rng.gen::<f64>()
            }
        })
        .collect();
    let follow = rng.gen_bool(0.5);
    let mut outcomes = Vec::with_capacity(horizon);
    let mut predictions = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let p = *palette.choose(rng).expect("non-empty palette");
        let q = if follow { p } else { 0.5 };
        outcomes.push(u8::from(rng.gen_bool(q)));
        predictions.push(p);
    }
    Transcript::new(outcomes, predictions).expect("generated transcript is valid")
}

/// Predictions perturbed by at most `radius` per step, clamped to `[0, 1]`.
/// With a positive radius some steps also snap onto another step's value so
/// that bins merge.
pub fn perturb<R: Rng + ?Sized>(rng: &mut R, predictions: &[f64], radius: f64) -> Vec<f64> {
    if radius <= 0.0 {
        return predictions.to_vec();
    }
    let mut out: Vec<f64> = predictions
        .iter()
        .map(|&p| (p + rng.gen_range(-radius..=radius)).clamp(0.0, 1.0))
        .collect();
    for t in 0..out.len() {
        if rng.gen_bool(0.2) {
            let s = rng.gen_range(0..out.len());
            if (predictions[s] - predictions[t]).abs() <= radius {
                out[t] = predictions[s];
            }
        }
    }
    out
}

/// A calibrated plan with at most `max_support` destinations for grid
/// predictions `j/20`. Rows spread mass over one to three random groups and
/// each destination is set to the mass-weighted ones-fraction of its group,
/// which makes the plan calibrated by construction.
pub fn random_calibrated_plan<R: Rng + ?Sized>(
    rng: &mut R,
    max_t: usize,
    max_support: usize,
) -> (Vec<u8>, Vec<f64>, TransportPlan) {
    let horizon = rng.gen_range(1..=max_t.max(1));
    let groups = rng.gen_range(1..=max_support.max(1));
    let outcomes: Vec<u8> = (0..horizon).map(|_| u8::from(rng.gen_bool(0.5))).collect();
    let predictions: Vec<f64> = (0..horizon)
        .map(|_| f64::from(rng.gen_range(0..=20u32)) / 20.0)
        .collect();
    let mut weights = vec![vec![0.0; groups]; horizon];
    for row in weights.iter_mut() {
        let spread = rng.gen_range(1..=3.min(groups));
        let mut chosen: Vec<usize> = (0..groups).collect();
        chosen.shuffle(rng);
        let raw: Vec<f64> = (0..spread).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for (&g, w) in chosen.iter().zip(&raw) {
            row[g] = w / total;
        }
    }
    let mut mass = vec![0.0; groups];
    let mut ones = vec![0.0; groups];
    for (row, &x) in weights.iter().zip(&outcomes) {
        for (g, &w) in row.iter().enumerate() {
            mass[g] += w;
            ones[g] += w * f64::from(x);
        }
    }
    let dest: Vec<f64> = (0..groups)
        .map(|g| if mass[g] > 0.0 { (ones[g] / mass[g]).clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    let rows: Vec<Vec<(f64, f64)>> = weights
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(g, &w)| (dest[g], w))
                .collect()
        })
        .collect();
    let plan = TransportPlan::from_sparse_rows(&rows, 0.0).expect("generated plan is valid");
    (outcomes, predictions, plan)
}
