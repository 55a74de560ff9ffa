//! Core data model: transcripts, bias accounting, transport plans and
//! calibrated-prediction certificates.
//!
//! Every type here is immutable after construction. Constructors validate
//! their invariants and the accessors never hand out mutable state, so values
//! can be shared freely across threads.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};

/// Absolute per-constraint tolerance used by calibration checks unless a
/// caller asks for something else.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Tolerance for a transport-plan row to count as summing to one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Sign with `sgn(0) = 0`.
pub fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Bit pattern used to group reals by exact equality. `-0.0` is folded into
/// `+0.0` so that the two zeros land in the same bin.
#[inline]
pub(crate) fn value_key(v: f64) -> u64 {
    if v == 0.0 {
        0.0f64.to_bits()
    } else {
        v.to_bits()
    }
}

/// One round of the game: the adversary's bit and the forecaster's prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub outcome: u8,
    pub prediction: f64,
}

impl Step {
    pub fn bias(&self) -> f64 {
        f64::from(self.outcome) - self.prediction
    }
}

/// Outcomes `x ∈ {0,1}^T` paired with predictions `p ∈ [0,1]^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    outcomes: Vec<u8>,
    predictions: Vec<f64>,
}

impl Transcript {
    pub fn new(outcomes: Vec<u8>, predictions: Vec<f64>) -> Result<Self> {
        validate_outcomes(&outcomes)?;
        if predictions.len() != outcomes.len() {
            return Err(CalibError::LengthMismatch {
                what: "predictions",
                expected: outcomes.len(),
                got: predictions.len(),
            });
        }
        let predictions = predictions
            .into_iter()
            .enumerate()
            .map(|(step, v)| {
                if v.is_finite() && (0.0..=1.0).contains(&v) {
                    // normalise -0.0
                    Ok(if v == 0.0 { 0.0 } else { v })
                } else {
                    Err(CalibError::InvalidPrediction { step, value: v })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            outcomes,
            predictions,
        })
    }

    pub fn from_steps(steps: &[Step]) -> Result<Self> {
        Self::new(
            steps.iter().map(|s| s.outcome).collect(),
            steps.iter().map(|s| s.prediction).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[u8] {
        &self.outcomes
    }

    pub fn predictions(&self) -> &[f64] {
        &self.predictions
    }

    pub fn steps(&self) -> impl Iterator<Item = Step> + '_ {
        self.outcomes
            .iter()
            .zip(&self.predictions)
            .map(|(&outcome, &prediction)| Step {
                outcome,
                prediction,
            })
    }

    /// Number of distinct prediction values.
    pub fn distinct_predictions(&self) -> usize {
        let mut keys: Vec<u64> = self.predictions.iter().map(|&p| value_key(p)).collect();
        keys.sort_unstable();
        keys.dedup();
        keys.len()
    }
}

pub(crate) fn validate_outcomes(outcomes: &[u8]) -> Result<()> {
    if outcomes.is_empty() {
        return Err(CalibError::Empty);
    }
    if let Some((step, &value)) = outcomes.iter().enumerate().find(|(_, &b)| b > 1) {
        return Err(CalibError::InvalidOutcome { step, value });
    }
    Ok(())
}

/// Accumulated bias `Δ_α = Σ_t (x_t − p_t)·1{p_t = α}` for every predicted
/// value `α`, sorted by `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasProfile {
    entries: Vec<BiasEntry>,
    horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasEntry {
    pub value: f64,
    pub bias: f64,
    pub count: usize,
}

impl BiasProfile {
    pub fn entries(&self) -> &[BiasEntry] {
        &self.entries
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn get(&self, value: f64) -> Option<f64> {
        let key = value_key(value);
        self.entries
            .iter()
            .find(|e| value_key(e.value) == key)
            .map(|e| e.bias)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.bias).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn bias_profile(tr: &Transcript) -> BiasProfile {
    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut entries: Vec<BiasEntry> = Vec::new();
    for step in tr.steps() {
        let slot = *index.entry(value_key(step.prediction)).or_insert_with(|| {
            entries.push(BiasEntry {
                value: step.prediction,
                bias: 0.0,
                count: 0,
            });
            entries.len() - 1
        });
        entries[slot].bias += step.bias();
        entries[slot].count += 1;
    }
    entries.sort_by(|a, b| a.value.total_cmp(&b.value));
    BiasProfile {
        entries,
        horizon: tr.len(),
    }
}

/// Prefix sums `S_t = Σ_{t' ≤ t} (x_t' − p_t')`.
pub fn running_bias(tr: &Transcript) -> Vec<f64> {
    tr.steps()
        .scan(0.0, |acc, s| {
            *acc += s.bias();
            Some(*acc)
        })
        .collect()
}

/// True iff every bin of equal `q` values has accumulated bias within `tol`.
pub fn calibration_check(outcomes: &[u8], q: &[f64], tol: f64) -> Result<bool> {
    if q.len() != outcomes.len() {
        return Err(CalibError::LengthMismatch {
            what: "calibrated values",
            expected: outcomes.len(),
            got: q.len(),
        });
    }
    if tol < 0.0 {
        return Err(CalibError::InvalidParameter(format!(
            "tolerance must be non-negative, got {tol}"
        )));
    }
    let mut bins: HashMap<u64, f64> = HashMap::new();
    for (&x, &v) in outcomes.iter().zip(q) {
        *bins.entry(value_key(v)).or_insert(0.0) += f64::from(x) - v;
    }
    Ok(bins.values().all(|r| r.abs() <= tol))
}

/// Per-step destination distributions over a shared, strictly sorted
/// destination set. Row `t` is `D_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    destinations: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl TransportPlan {
    pub fn new(destinations: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(CalibError::Empty);
        }
        if destinations.is_empty() {
            return Err(CalibError::InvalidPlan("no destinations".into()));
        }
        for &s in &destinations {
            if !(s.is_finite() && (0.0..=1.0).contains(&s)) {
                return Err(CalibError::InvalidPlan(format!(
                    "destination {s} outside [0, 1]"
                )));
            }
        }
        if destinations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CalibError::InvalidPlan(
                "destinations must be strictly increasing".into(),
            ));
        }
        for (t, row) in rows.iter().enumerate() {
            if row.len() != destinations.len() {
                return Err(CalibError::InvalidPlan(format!(
                    "row {t} has {} entries for {} destinations",
                    row.len(),
                    destinations.len()
                )));
            }
            if row.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
                return Err(CalibError::InvalidPlan(format!(
                    "row {t} has a negative or non-finite entry"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(CalibError::InvalidPlan(format!(
                    "row {t} sums to {total}, expected 1"
                )));
            }
        }
        Ok(Self { destinations, rows })
    }

    /// Plan that sends step `t` to `targets[t]` with probability one.
    pub fn degenerate(targets: &[f64]) -> Result<Self> {
        let mut destinations: Vec<f64> = targets.to_vec();
        destinations.sort_by(f64::total_cmp);
        destinations.dedup_by(|a, b| value_key(*a) == value_key(*b));
        let rows = targets
            .iter()
            .map(|&q| {
                let mut row = vec![0.0; destinations.len()];
                let j = destinations
                    .binary_search_by(|s| s.total_cmp(&q))
                    .unwrap_or_else(|j| j);
                row[j] = 1.0;
                row
            })
            .collect();
        Self::new(destinations, rows)
    }

    /// Builds a plan from sparse per-step `(destination, mass)` lists, merging
    /// equal destinations and dropping entries below `drop_below`.
    pub fn from_sparse_rows(rows: &[Vec<(f64, f64)>], drop_below: f64) -> Result<Self> {
        let mut destinations: Vec<f64> = rows
            .iter()
            .flatten()
            .filter(|(_, w)| *w > drop_below)
            .map(|&(s, _)| if s == 0.0 { 0.0 } else { s })
            .collect();
        destinations.sort_by(f64::total_cmp);
        destinations.dedup_by(|a, b| value_key(*a) == value_key(*b));
        let dense = rows
            .iter()
            .map(|row| {
                let mut out = vec![0.0; destinations.len()];
                for &(s, w) in row {
                    if w > drop_below {
                        let j = destinations
                            .binary_search_by(|d| d.total_cmp(&s))
                            .expect("destination collected above");
                        out[j] += w;
                    }
                }
                out
            })
            .collect();
        Self::new(destinations, dense)
    }

    pub fn destinations(&self) -> &[f64] {
        &self.destinations
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn horizon(&self) -> usize {
        self.rows.len()
    }

    /// Total mass delivered to each destination.
    pub fn destination_mass(&self) -> Vec<f64> {
        let mut mass = vec![0.0; self.destinations.len()];
        for row in &self.rows {
            for (m, w) in mass.iter_mut().zip(row) {
                *m += w;
            }
        }
        mass
    }

    /// Number of destinations that actually receive mass.
    pub fn support_size(&self) -> usize {
        self.destination_mass().iter().filter(|&&m| m > 0.0).count()
    }

    /// Drops destinations that receive no mass.
    pub fn pruned(&self) -> Self {
        let mass = self.destination_mass();
        let keep: Vec<usize> = (0..mass.len()).filter(|&j| mass[j] > 0.0).collect();
        Self {
            destinations: keep.iter().map(|&j| self.destinations[j]).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&j| r[j]).collect())
                .collect(),
        }
    }

    /// Largest calibration residual `|Σ_t (x_t − s)·D_t(s)|` over destinations.
    pub fn calibration_residual(&self, outcomes: &[u8]) -> Result<f64> {
        self.check_horizon(outcomes.len())?;
        let mut worst: f64 = 0.0;
        for (j, &s) in self.destinations.iter().enumerate() {
            let r: f64 = outcomes
                .iter()
                .zip(&self.rows)
                .map(|(&x, row)| (f64::from(x) - s) * row[j])
                .sum();
            worst = worst.max(r.abs());
        }
        Ok(worst)
    }

    pub(crate) fn check_horizon(&self, len: usize) -> Result<()> {
        if self.rows.len() != len {
            return Err(CalibError::LengthMismatch {
                what: "plan rows",
                expected: len,
                got: self.rows.len(),
            });
        }
        Ok(())
    }
}

/// True iff `|Σ_t (x_t − α)·D_t(α)| ≤ tol` for every destination `α`.
pub fn plan_calibration_check(outcomes: &[u8], plan: &TransportPlan, tol: f64) -> Result<bool> {
    Ok(plan.calibration_residual(outcomes)? <= tol)
}

/// Expected transport cost `Σ_t Σ_s D_t(s)·|p_t − s|`.
pub fn plan_cost(predictions: &[f64], plan: &TransportPlan) -> Result<f64> {
    plan.check_horizon(predictions.len())?;
    Ok(predictions
        .iter()
        .zip(plan.rows())
        .map(|(&p, row)| {
            row.iter()
                .zip(plan.destinations())
                .map(|(&w, &s)| w * (p - s).abs())
                .sum::<f64>()
        })
        .sum())
}

/// A prediction vector `q` with the partition of steps that induces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedPredictions {
    values: Vec<f64>,
    partition: Vec<Vec<usize>>,
}

impl CalibratedPredictions {
    /// Groups steps by exact equality of `values`. Blocks are ordered by their
    /// first step.
    pub fn from_values(values: Vec<f64>) -> Self {
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut partition: Vec<Vec<usize>> = Vec::new();
        for (t, &v) in values.iter().enumerate() {
            let b = *index.entry(value_key(v)).or_insert_with(|| {
                partition.push(Vec::new());
                partition.len() - 1
            });
            partition[b].push(t);
        }
        Self { values, partition }
    }

    /// Assigns every block the mean outcome of its members.
    pub fn from_partition(outcomes: &[u8], partition: Vec<Vec<usize>>) -> Result<Self> {
        let n = outcomes.len();
        let mut values = vec![f64::NAN; n];
        let mut seen = vec![false; n];
        for block in &partition {
            if block.is_empty() {
                return Err(CalibError::InvalidParameter("empty partition block".into()));
            }
            let ones: usize = block.iter().map(|&t| usize::from(outcomes[t])).sum();
            let mean = ones as f64 / block.len() as f64;
            for &t in block {
                if t >= n || seen[t] {
                    return Err(CalibError::InvalidParameter(format!(
                        "step {t} is out of range or appears twice in the partition"
                    )));
                }
                seen[t] = true;
                values[t] = mean;
            }
        }
        if let Some(t) = seen.iter().position(|s| !s) {
            return Err(CalibError::InvalidParameter(format!(
                "step {t} is not covered by the partition"
            )));
        }
        Ok(Self { values, partition })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn partition(&self) -> &[Vec<usize>] {
        &self.partition
    }

    pub fn distance(&self, predictions: &[f64]) -> f64 {
        predictions
            .iter()
            .zip(&self.values)
            .map(|(p, q)| (p - q).abs())
            .sum()
    }

    /// Checks that the blocks are a partition of the steps, that each block
    /// shares one value, and that `q` is calibrated for `outcomes`.
    pub fn verify(&self, outcomes: &[u8], tol: f64) -> Result<bool> {
        let n = outcomes.len();
        if self.values.len() != n {
            return Err(CalibError::LengthMismatch {
                what: "calibrated values",
                expected: n,
                got: self.values.len(),
            });
        }
        let mut seen = vec![false; n];
        for block in &self.partition {
            let Some(&first) = block.first() else {
                return Ok(false);
            };
            for &t in block {
                if t >= n || seen[t] || value_key(self.values[t]) != value_key(self.values[first])
                {
                    return Ok(false);
                }
                seen[t] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Ok(false);
        }
        calibration_check(outcomes, &self.values, tol)
    }
}

/// Piecewise-linear function on `[0, 1]` given by sorted knots, held constant
/// outside the outermost knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzWitness {
    knots: Vec<(f64, f64)>,
}

impl LipschitzWitness {
    /// Accepts knots with a small slack on the Lipschitz and range constraints
    /// to absorb LP round-off.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        const SLACK: f64 = 1e-9;
        if knots.is_empty() {
            return Err(CalibError::InvalidParameter("witness needs a knot".into()));
        }
        if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(CalibError::InvalidParameter(
                "witness knots must be strictly increasing".into(),
            ));
        }
        for &(pos, val) in &knots {
            if !(0.0..=1.0).contains(&pos) || val.abs() > 1.0 + SLACK {
                return Err(CalibError::InvalidParameter(format!(
                    "witness knot ({pos}, {val}) out of range"
                )));
            }
        }
        for w in knots.windows(2) {
            if (w[1].1 - w[0].1).abs() > (w[1].0 - w[0].0) + SLACK {
                return Err(CalibError::InvalidParameter(format!(
                    "witness slope between {} and {} exceeds 1",
                    w[0].0, w[1].0
                )));
            }
        }
        Ok(Self { knots })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            knots: vec![(0.0, value)],
        }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, v: f64) -> f64 {
        let k = &self.knots;
        let first = k[0];
        let last = k[k.len() - 1];
        if v <= first.0 {
            return first.1;
        }
        if v >= last.0 {
            return last.1;
        }
        let i = k.partition_point(|&(pos, _)| pos <= v);
        let (x0, y0) = k[i - 1];
        let (x1, y1) = k[i];
        y0 + (y1 - y0) * (v - x0) / (x1 - x0)
    }

    /// `Σ_α f(α)·Δ_α` over a bias profile.
    pub fn objective(&self, profile: &BiasProfile) -> f64 {
        profile
            .entries()
            .iter()
            .map(|e| self.eval(e.value) * e.bias)
            .sum()
    }

    /// Largest violation of the range or slope constraints at the knots.
    pub fn max_violation(&self) -> f64 {
        let range = self
            .knots
            .iter()
            .map(|&(_, v)| (v.abs() - 1.0).max(0.0))
            .fold(0.0, f64::max);
        let slope = self
            .knots
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1).abs() - (w[1].0 - w[0].0)).max(0.0))
            .fold(0.0, f64::max);
        range.max(slope)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(x: &[u8], p: &[f64]) -> Transcript {
        Transcript::new(x.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn bias_profile_examples() {
        let b = bias_profile(&tr(&[0, 1], &[0.5, 0.5]));
        assert_eq!(b.len(), 1);
        assert_eq!(b.get(0.5), Some(0.0));

        let b = bias_profile(&tr(&[1, 0], &[0.3, 0.6]));
        assert!((b.get(0.3).unwrap() - 0.7).abs() < 1e-15);
        assert!((b.get(0.6).unwrap() + 0.6).abs() < 1e-15);

        let b = bias_profile(&tr(&[1], &[1.0]));
        assert_eq!(b.get(1.0), Some(0.0));
    }

    #[test]
    fn running_bias_examples() {
        assert_eq!(
            running_bias(&tr(&[1, 1, 0], &[0.5, 0.75, 0.75])),
            vec![0.5, 0.75, 0.0]
        );
        assert_eq!(running_bias(&tr(&[0], &[0.0])), vec![0.0]);
        assert_eq!(running_bias(&tr(&[1, 0], &[0.0, 1.0])), vec![1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(Transcript::new(vec![], vec![]), Err(CalibError::Empty));
        assert!(matches!(
            Transcript::new(vec![2], vec![0.5]),
            Err(CalibError::InvalidOutcome { step: 0, value: 2 })
        ));
        assert!(matches!(
            Transcript::new(vec![1, 0], vec![0.5, f64::NAN]),
            Err(CalibError::InvalidPrediction { step: 1, .. })
        ));
        assert!(matches!(
            Transcript::new(vec![1], vec![1.5]),
            Err(CalibError::InvalidPrediction { .. })
        ));
        assert!(matches!(
            Transcript::new(vec![1], vec![0.5, 0.5]),
            Err(CalibError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn negative_zero_groups_with_zero() {
        let t = tr(&[0, 0], &[0.0, -0.0]);
        assert_eq!(bias_profile(&t).len(), 1);
        assert!(t.predictions()[1].is_sign_positive());
    }

    #[test]
    fn calibration_check_examples() {
        assert!(calibration_check(&[0, 1], &[0.5, 0.5], 0.0).unwrap());
        assert!(!calibration_check(&[0, 1], &[0.5, 0.6], 0.0).unwrap());
        let third = 2.0 / 3.0;
        assert!(calibration_check(&[1, 0, 1], &[third, third, third], 1e-12).unwrap());
        assert!(calibration_check(&[1, 0], &[0.5], 0.0).is_err());
    }

    fn section_plan(eps: f64) -> (Vec<u8>, Vec<f64>, TransportPlan) {
        let lo = 0.5 - eps;
        let hi = 0.5 + eps;
        let beta = lo / hi;
        let plan = TransportPlan::new(
            vec![lo, 0.5, hi],
            vec![
                vec![1.0, 0.0, 0.0],
                vec![beta, 1.0 - beta, 0.0],
                vec![0.0, 1.0 - beta, beta],
                vec![0.0, 0.0, 1.0],
            ],
        )
        .unwrap();
        (vec![0, 1, 0, 1], vec![lo, lo, hi, hi], plan)
    }

    #[test]
    fn plan_checks_on_split_example() {
        let (x, p, plan) = section_plan(0.02);
        assert!(plan_calibration_check(&x, &plan, 1e-12).unwrap());
        let cost = plan_cost(&p, &plan).unwrap();
        let expected = 4.0 * 0.02f64.powi(2) / (0.5 + 0.02);
        assert!((cost - expected).abs() < 1e-15);
        assert!((cost - 0.003_076_923).abs() < 1e-9);

        // shift 0.1 of row 1 from 0.48 to 0.52
        let mut rows = plan.rows().to_vec();
        rows[1][0] -= 0.1;
        rows[1][2] += 0.1;
        let shifted = TransportPlan::new(plan.destinations().to_vec(), rows).unwrap();
        assert!(!plan_calibration_check(&x, &shifted, 1e-9).unwrap());
    }

    #[test]
    fn degenerate_plan_costs() {
        let p = [0.2, 0.9, 0.2];
        let plan = TransportPlan::degenerate(&p).unwrap();
        assert_eq!(plan.destinations(), &[0.2, 0.9]);
        assert_eq!(plan_cost(&p, &plan).unwrap(), 0.0);

        let q = [0.5, 0.5];
        let plan = TransportPlan::degenerate(&q).unwrap();
        assert!(plan_calibration_check(&[0, 1], &plan, 0.0).unwrap());

        let split = TransportPlan::new(vec![0.0, 1.0], vec![vec![0.5, 0.5]]).unwrap();
        assert_eq!(plan_cost(&[0.25], &split).unwrap(), 0.5);
    }

    #[test]
    fn plan_validation() {
        assert!(TransportPlan::new(vec![0.5, 0.5], vec![vec![0.5, 0.5]]).is_err());
        assert!(TransportPlan::new(vec![0.6, 0.5], vec![vec![0.5, 0.5]]).is_err());
        assert!(TransportPlan::new(vec![0.5], vec![vec![0.9]]).is_err());
        assert!(TransportPlan::new(vec![0.0, 1.0], vec![vec![1.5, -0.5]]).is_err());
        assert!(TransportPlan::new(vec![0.0, 1.5], vec![vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn partitions_and_certificates() {
        let x = [1, 0, 1, 1];
        let c = CalibratedPredictions::from_partition(&x, vec![vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(c.values(), &[0.5, 0.5, 1.0, 1.0]);
        assert!(c.verify(&x, 0.0).unwrap());
        assert!(CalibratedPredictions::from_partition(&x, vec![vec![0, 1], vec![2]]).is_err());
        assert!(CalibratedPredictions::from_partition(&x, vec![vec![0, 1], vec![1, 2, 3]]).is_err());

        let bad = CalibratedPredictions::from_values(vec![0.5, 0.5, 0.9, 1.0]);
        assert!(!bad.verify(&x, 1e-9).unwrap());
    }

    #[test]
    fn witness_eval_and_validation() {
        let w = LipschitzWitness::new(vec![(0.2, 0.0), (0.6, 0.4)]).unwrap();
        assert_eq!(w.eval(0.0), 0.0);
        assert!((w.eval(0.4) - 0.2).abs() < 1e-15);
        assert_eq!(w.eval(0.9), 0.4);
        assert!(LipschitzWitness::new(vec![(0.2, 0.0), (0.3, 0.5)]).is_err());
        assert!(LipschitzWitness::new(vec![(0.2, 1.5)]).is_err());
        assert!(w.max_violation() < 1e-15);
    }
}
